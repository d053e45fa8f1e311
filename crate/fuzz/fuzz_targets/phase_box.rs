#![no_main]

use contact_hj::bracket::PhaseBox;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for d in 1..=2 {
        if let Ok(b) = PhaseBox::parse(s, d) {
            assert!(b.x.0 <= b.x.1 && b.p.0 <= b.p.1 && b.u.0 <= b.u.1);
            let again = PhaseBox::parse(&b.to_string(), d).expect("display parses");
            assert_eq!(again, b);
        }
    }
});
