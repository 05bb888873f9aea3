#![no_main]

use libfuzzer_sys::fuzz_target;
use qbc_core::channels::BroadcastChannel;

fuzz_target!(|data: &str| {
    if let Ok(ch) = BroadcastChannel::from_json_str(data) {
        let text = serde_json::to_string(&ch.to_file()).unwrap();
        let back = BroadcastChannel::from_json_str(&text).unwrap();
        assert_eq!(back.input_dim(), ch.input_dim());
        assert_eq!(back.output_labels(), ch.output_labels());
    }
});
