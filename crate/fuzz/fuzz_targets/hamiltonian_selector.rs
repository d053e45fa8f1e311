#![no_main]

use contact_hj::catalog::{resolve, Selector};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(sel) = Selector::parse(s) {
        // The canonical form parses back to the same selector.
        let again = Selector::parse(&sel.to_string()).expect("canonical form parses");
        assert_eq!(again, sel);
    }
    if let Ok(spec) = resolve(s) {
        for d in 1..=2 {
            if spec.check_dim(d).is_ok() {
                let _ = spec.value(&[0.5, -0.5][..d], &[0.25, 0.75][..d], 0.1);
            }
        }
    }
});
