#![no_main]

use libfuzzer_sys::fuzz_target;
use transgap::io::{parse_bundle, render_bundle};

// Four files separated by NUL bytes: meta, edges, features, labels.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let parts: Vec<&str> = text.split('\0').collect();
    let [meta, edges, features, labels] = parts[..] else { return };
    let Ok(b) = parse_bundle(meta, edges, features, labels) else { return };
    let [(_, m), (_, e), (_, f), (_, l)] = render_bundle(&b);
    let again = parse_bundle(&m, &e, &f, &l).expect("rendered bundle parses");
    assert_eq!(again, b);
});
