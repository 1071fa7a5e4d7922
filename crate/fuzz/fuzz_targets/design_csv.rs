#![no_main]
use libfuzzer_sys::fuzz_target;
use stepslope::io::{design_to_csv, parse_design_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(x) = parse_design_csv(text) {
        let again = parse_design_csv(&design_to_csv(&x)).unwrap();
        assert_eq!(again, x);
    }
});
