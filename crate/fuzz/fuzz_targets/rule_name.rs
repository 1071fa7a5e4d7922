#![no_main]
use libfuzzer_sys::fuzz_target;
use stepslope::ScheduleRule;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(rule) = s.parse::<ScheduleRule>() {
            assert_eq!(rule.name(), s);
        }
    }
});
