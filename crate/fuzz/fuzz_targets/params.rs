#![no_main]

use libfuzzer_sys::fuzz_target;
use transgap::nn::{Activation, Arch, ModelSpec, ParamVector};

fuzz_target!(|data: &[u8]| {
    let spec = ModelSpec::new(Arch::gcn(), 3, 2, 2, Activation::new(2.0).unwrap()).unwrap();
    if let Ok(p) = ParamVector::from_le_bytes(spec.layout(), data) {
        assert_eq!(p.to_le_bytes(), data);
    }
});
