#![no_main]
use libfuzzer_sys::fuzz_target;
use stepslope::group::WeightScheme;
use stepslope::io::parse_partition_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = parse_partition_csv(text, WeightScheme::SqrtSize) {
        let covered: usize = p.groups().iter().map(Vec::len).sum();
        assert_eq!(covered, p.num_features());
        assert!(p.weights().iter().all(|w| *w > 0.0));
    }
});
