#![no_main]
use libfuzzer_sys::fuzz_target;
use stepslope::io::{parse_schedule_json, schedule_to_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(lam) = parse_schedule_json(text) {
            let back = parse_schedule_json(&schedule_to_json(&lam).unwrap()).unwrap();
            assert_eq!(back, lam);
        }
    }
});
