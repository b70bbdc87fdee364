//! Measurement CSV decoding. Accepted input must be valid and re-encode losslessly.

#![no_main]

use amf_core::io::tables::{measurements_to_csv, parse_measurements};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_measurements(text) {
        assert!(m.noise_sd().iter().all(|s| *s > 0.0));
        let back = parse_measurements(&measurements_to_csv(&m)).expect("round trip");
        assert_eq!(back.len(), m.len());
    }
});
