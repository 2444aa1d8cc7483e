#![no_main]

use libfuzzer_sys::fuzz_target;
use tvgp::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Parsing and validation may reject the input but must never panic.
        if let Ok(cfg) = ExperimentConfig::parse(text) {
            let _ = cfg.validate();
            let _ = cfg.kernel_spec();
        }
    }
});
