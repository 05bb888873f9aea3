#![no_main]

use libfuzzer_sys::fuzz_target;
use qbc_core::io::{parse_state, StateFile};

fuzz_target!(|data: &str| {
    if let Ok(psi) = parse_state(data) {
        let norm = psi.amplitudes().norm();
        assert!((norm - 1.0).abs() < 1e-9);
        let again = StateFile::from_state(&psi).to_state().unwrap();
        assert_eq!(again.layout(), psi.layout());
    }
});
