#![no_main]

use eitlab::config::{exit_code, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match RunConfig::from_json(text) {
        Ok(config) => {
            if let Err(e) = config.validate() {
                assert!(exit_code(&e) > 1);
            }
        }
        Err(e) => assert_eq!(exit_code(&e), 3),
    }
});
