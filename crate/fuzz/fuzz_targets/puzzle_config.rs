#![no_main]

use libfuzzer_sys::fuzz_target;
use physbox::worldgen::{generate, PuzzleConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = PuzzleConfig::from_text(text) {
        let _ = generate(&c);
    }
});
