#![no_main]

use libfuzzer_sys::fuzz_target;
use physbox::gateway::Message;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = Message::from_bytes(data) {
        let again = Message::from_bytes(&m.to_bytes()).expect("reparse");
        assert_eq!(again.to_bytes(), m.to_bytes());
    }
});
