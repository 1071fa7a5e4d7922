#![no_main]
use libfuzzer_sys::fuzz_target;
use stepslope::io::{parse_schedule_csv, schedule_to_csv};

// parse -> write -> parse must reproduce the values bit for bit
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(lam) = parse_schedule_csv(text) {
        let back = parse_schedule_csv(&schedule_to_csv(&lam)).unwrap();
        let a: Vec<u64> = lam.values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }
});
