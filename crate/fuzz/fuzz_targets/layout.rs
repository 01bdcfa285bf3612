#![no_main]

use libfuzzer_sys::fuzz_target;
use transgap::nn::Layout;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(l) = Layout::from_json(text) {
        let again = Layout::from_json(&l.to_json()).expect("rendered layout parses");
        assert_eq!(again, l);
    }
});
