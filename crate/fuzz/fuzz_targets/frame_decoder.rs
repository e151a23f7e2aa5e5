#![no_main]

use libfuzzer_sys::fuzz_target;
use physbox::gateway::{read_frame, FrameDecoder};

const MAX: usize = 4096;

fuzz_target!(|data: &[u8]| {
    let mut whole = Vec::new();
    let mut r = data;
    while let Ok(Some(f)) = read_frame(&mut r, MAX) {
        assert!(f.len() <= MAX);
        whole.push(f);
    }
    // Byte-at-a-time feeding must yield the same frames.
    let mut d = FrameDecoder::new(MAX);
    let mut split = Vec::new();
    'outer: for b in data {
        d.push(std::slice::from_ref(b));
        loop {
            match d.next_frame() {
                Ok(Some(f)) => split.push(f),
                Ok(None) => break,
                Err(_) => break 'outer,
            }
        }
    }
    assert_eq!(whole, split);
});
