#![no_main]

use libfuzzer_sys::fuzz_target;
use parnet_core::io::{weights_from_json, weights_to_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(w) = weights_from_json(text) {
            let again = weights_from_json(&weights_to_json(&w)).expect("re-parse");
            assert_eq!(again, w);
        }
    }
});
