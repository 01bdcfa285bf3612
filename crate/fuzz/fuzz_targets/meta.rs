#![no_main]

use libfuzzer_sys::fuzz_target;
use transgap::io::parse_meta;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_meta(text) {
        assert!(m.n > 0 && m.d > 0 && m.num_classes > 0);
    }
});
