#![no_main]

use libfuzzer_sys::fuzz_target;
use physbox::gateway::Session;

// Newline-separated payloads fed to one session.
fuzz_target!(|data: &[u8]| {
    let mut s = Session::new(1);
    for payload in data.split(|&b| b == b'\n').take(64) {
        let reply = s.handle_frame(payload);
        if reply.closes() {
            assert!(s.is_closed());
            break;
        }
    }
});
