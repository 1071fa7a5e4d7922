#![no_main]
use libfuzzer_sys::fuzz_target;
use serde_json::Value;
use stepslope::io::parse_config_json;

fn largest(v: &Value) -> f64 {
    match v {
        Value::Number(n) => n.as_f64().unwrap_or(f64::INFINITY).abs(),
        Value::Array(a) => a.iter().map(largest).fold(0.0, f64::max),
        Value::Object(o) => o.values().map(largest).fold(0.0, f64::max),
        _ => 0.0,
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = parse_config_json(text) else {
        return;
    };
    // resolving allocates per group and per grid cell, keep sizes modest
    let combos: usize = spec
        .blocks
        .iter()
        .map(|b| b.grid.values().map(Vec::len).product::<usize>())
        .sum();
    let raw = serde_json::to_value(&spec).unwrap();
    if combos <= 64 && largest(&raw) <= 1e6 {
        if let Ok(suite) = spec.resolve(&Default::default()) {
            assert!(suite.experiments.iter().all(|c| c.validate().is_ok()));
        }
    }
});
