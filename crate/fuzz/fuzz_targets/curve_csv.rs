#![no_main]

use libfuzzer_sys::fuzz_target;
use parnet_core::report::{curve_csv, parse_curve_csv};

// Compared as text: NaN entries are legal and never equal themselves.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = parse_curve_csv(text) {
            let canonical = curve_csv(&rows);
            assert_eq!(curve_csv(&parse_curve_csv(&canonical).expect("re-parse")), canonical);
        }
    }
});
