#![no_main]

use libfuzzer_sys::fuzz_target;
use qbc_core::io::parse_dims;

fuzz_target!(|data: &str| {
    if let Ok(layout) = parse_dims(data) {
        let text: Vec<String> = layout.factors().iter().map(|f| format!("{}={}", f.label, f.dim)).collect();
        assert_eq!(parse_dims(&text.join(",")).unwrap(), layout);
    }
});
