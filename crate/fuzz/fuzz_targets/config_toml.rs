//! Run-configuration parsing. Accepted files must survive a serialize/parse round trip.

#![no_main]

use amf_core::io::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let again = RunConfig::from_toml(&cfg.to_toml()).expect("re-serialized config parses");
        assert_eq!(again.mode, cfg.mode);
        assert_eq!(again.seed, cfg.seed);
    }
});
