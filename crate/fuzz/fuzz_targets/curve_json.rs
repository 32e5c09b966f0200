#![no_main]

use libfuzzer_sys::fuzz_target;
use parnet_core::report::{curve_json, parse_curve_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = parse_curve_json(text) {
            if let Ok(out) = curve_json(&rows) {
                assert_eq!(parse_curve_json(&out).expect("re-parse"), rows);
            }
        }
    }
});
