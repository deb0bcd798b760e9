#![no_main]

use libfuzzer_sys::fuzz_target;
use pendavg_cli::config::{ConfigLayer, Experiment};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(layer) = ConfigLayer::from_json(s) {
            let _ = Experiment::resolve(&[layer]);
        }
    }
});
