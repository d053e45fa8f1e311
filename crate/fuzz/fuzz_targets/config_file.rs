#![no_main]

use contact_hj_cli::config::parse_key_values;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(pairs) = parse_key_values(s) {
        for (k, _) in &pairs {
            assert!(!k.is_empty() && !k.contains('_'));
        }
    }
});
