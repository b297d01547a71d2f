#![no_main]

use fieldnet::wire::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = decode(data) {
        let bytes = encode(&msg);
        let again = decode(&bytes).expect("re-encoded message decodes");
        assert_eq!(encode(&again), bytes);
    }
});
