#![no_main]

use libfuzzer_sys::fuzz_target;
use physbox::eval::ASuccessReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = ASuccessReport::from_text(text) {
        assert!(r.score > -1e-9 && r.score < 1.0 + 1e-9);
    }
});
