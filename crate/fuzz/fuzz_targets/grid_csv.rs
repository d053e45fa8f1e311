#![no_main]

use contact_hj::{Boundary, GridFunction, GridSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for g in [
        GridSpec::new(1, 1.0, 5, Boundary::Clamped).unwrap(),
        GridSpec::new(2, 1.0, 3, Boundary::Periodic).unwrap(),
    ] {
        if let Ok(u) = GridFunction::from_csv(g, s) {
            assert_eq!(u.values().len(), g.len());
            let again = GridFunction::from_csv(g, &u.to_csv()).expect("written CSV parses");
            assert_eq!(again.values().len(), g.len());
        }
    }
});
