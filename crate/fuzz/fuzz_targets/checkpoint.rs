#![no_main]

use libfuzzer_sys::fuzz_target;
use physbox::nn::EncoderCheckpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = EncoderCheckpoint::from_bytes(data) {
        let bytes = ck.to_bytes().expect("decoded checkpoint re-encodes");
        let again = EncoderCheckpoint::from_bytes(&bytes).expect("reparse");
        assert_eq!(again.to_bytes().expect("re-encode"), bytes);
    }
});
