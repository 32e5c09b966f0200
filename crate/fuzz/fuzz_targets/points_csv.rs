#![no_main]

use libfuzzer_sys::fuzz_target;
use parnet_core::io::parse_points_csv;

// First byte picks the dimension.
fuzz_target!(|data: &[u8]| {
    let Some((&d, rest)) = data.split_first() else { return };
    let dim = 1 + (d % 4) as usize;
    if let Ok(text) = std::str::from_utf8(rest) {
        if let Ok(points) = parse_points_csv(text, dim) {
            assert_eq!(points.len() % dim, 0);
            assert!(points.iter().all(|v| v.is_finite()));
        }
    }
});
