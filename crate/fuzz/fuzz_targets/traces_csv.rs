//! Trace CSV decoding followed by the R-hat table the `diag` mode builds from it.

#![no_main]

use amf_core::io::rhat_csv;
use amf_core::io::tables::{parse_traces, traces_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = parse_traces(text) {
        let n_chains = t.history.n_chains();
        assert!(t.history.states.iter().all(|s| s.len() == n_chains));
        let again = parse_traces(&traces_to_csv(&t.names, &t.history, 0)).expect("round trip");
        assert_eq!(again.history.n_kept(), t.history.n_kept());
        let _ = rhat_csv(&t.names, &t.history, 10);
    }
});
