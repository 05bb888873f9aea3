#![no_main]

use libfuzzer_sys::fuzz_target;
use qbc_core::protocol::OneShotConfig;

fuzz_target!(|data: &str| {
    let _ = OneShotConfig::from_json_str(data);
});
