#![no_main]
use libfuzzer_sys::fuzz_target;
use stepslope::io::{parse_pvalues_csv, parse_vector_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(v) = parse_vector_csv(text) {
            assert!(v.iter().all(|x| x.is_finite()));
        }
        if let Ok(p) = parse_pvalues_csv(text) {
            assert!(p.values().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
});
