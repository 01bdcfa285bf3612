#![no_main]

use libfuzzer_sys::fuzz_target;
use transgap::io::parse_labels;

fuzz_target!(|data: &[u8]| {
    let Some((&shape, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let (n, c) = (1 + (shape & 0x1f) as usize, 1 + (shape >> 5) as usize);
    if let Ok(labels) = parse_labels(text, n, c) {
        assert_eq!(labels.len(), n);
        assert!(labels.iter().all(|&y| y < c));
    }
});
