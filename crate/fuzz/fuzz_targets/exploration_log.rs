#![no_main]

use libfuzzer_sys::fuzz_target;
use physbox::curriculum::{parse_log, replay};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_log(data) {
        let _ = replay(&records);
    }
});
