#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parnet_cli::config::parse_config(text) {
            // Accepted configs must yield a usable schedule at every sample size.
            for &n in &cfg.experiment.sample_sizes {
                let _ = parnet_core::schedule(n as f64, &cfg.constants, &cfg.topology);
            }
        }
    }
});
