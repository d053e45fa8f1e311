#![no_main]

use contact_hj::initial::InitialData;
use contact_hj::{Boundary, GridSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(expr) = InitialData::parse(s) {
        let g = GridSpec::new(2, 2.0, 5, Boundary::Periodic).unwrap();
        let _ = expr.sample(g);
    }
});
