#![no_main]

use libfuzzer_sys::fuzz_target;
use orlspi_core::noise::{magnitude_at, parse_schedule_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(kind) = parse_schedule_csv(data) {
        for t in [1, 2, 10, 1_000, u64::MAX] {
            let m = magnitude_at(&kind, t).expect("t >= 1 is in the domain");
            assert!(m.is_finite() && m >= 0.0);
        }
    }
});
