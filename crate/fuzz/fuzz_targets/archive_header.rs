#![no_main]

use libfuzzer_sys::fuzz_target;
use warmsplat::archive::{decode_header, header_len_from_prefix};

fuzz_target!(|data: &[u8]| {
    let _ = header_len_from_prefix(data);
    if let Ok(h) = decode_header(data) {
        assert!(h.header_len <= data.len());
        assert!(h.manifest.validate().is_ok());
    }
});
