#![no_main]

use libfuzzer_sys::fuzz_target;
use physbox::worldgen::TestSuite;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = TestSuite::from_text(text) {
        assert_eq!(s.puzzles.len(), 100);
    }
});
