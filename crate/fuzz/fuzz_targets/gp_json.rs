//! GP model file decoding. Loaded models must predict without panicking.

#![no_main]

use amf_core::io::gp_from_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(models) = gp_from_json(text) {
        for g in &models {
            let q = vec![0.5; g.dim()];
            let _ = g.predict(&q);
        }
    }
});
