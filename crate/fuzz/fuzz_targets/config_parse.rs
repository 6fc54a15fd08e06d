#![no_main]

use libfuzzer_sys::fuzz_target;
use orlspi_core::harness::{ExperimentConfig, ScheduleSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::from_json_str(text) else { return };
    // resolving would read arbitrary paths from disk
    if matches!(cfg.schedule, ScheduleSpec::CustomCsv { .. }) {
        return;
    }
    let too_big = [cfg.plant.a.as_ref(), cfg.plant.b.as_ref()]
        .into_iter()
        .flatten()
        .any(|m| m.len() > 8 || m.iter().any(|r| r.len() > 8));
    if too_big || cfg.horizon > 1_000_000 {
        return;
    }
    let _ = cfg.resolve(None);
});
