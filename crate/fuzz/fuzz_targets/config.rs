#![no_main]

use libfuzzer_sys::fuzz_target;
use transgap::cli::config_flags;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(flags) = config_flags(text) {
        assert!(flags.iter().all(|f| f != "--config"));
    }
});
