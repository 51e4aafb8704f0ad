#![no_main]

use libfuzzer_sys::fuzz_target;
use warmsplat::ply::{decode_ply, encode_ply};

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_ply(data) {
        let again = decode_ply(&encode_ply(&frame)).expect("re-encoded PLY must decode");
        assert_eq!(again.len(), frame.len());
    }
});
