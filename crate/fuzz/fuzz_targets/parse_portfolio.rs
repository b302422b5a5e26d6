#![no_main]

use libfuzzer_sys::fuzz_target;
use numkit_core::model::parse_portfolio;

fuzz_target!(|data: &str| {
    if let Ok(p) = parse_portfolio(data) {
        assert!(p.weights().iter().flatten().all(|v| v.is_finite()));
    }
});
