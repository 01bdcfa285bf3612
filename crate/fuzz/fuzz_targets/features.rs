#![no_main]

use libfuzzer_sys::fuzz_target;
use transgap::io::parse_features;

fuzz_target!(|data: &[u8]| {
    let Some((&shape, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let (n, d) = (1 + (shape & 0x0f) as usize, 1 + (shape >> 4) as usize);
    if let Ok(x) = parse_features(text, n, d) {
        assert_eq!((x.rows(), x.cols()), (n, d));
        assert!(x.is_finite());
    }
});
