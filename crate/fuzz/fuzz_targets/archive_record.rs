#![no_main]

use libfuzzer_sys::fuzz_target;
use warmsplat::archive::{decode_record, encode_record, ArchiveManifest};

fuzz_target!(|data: &[u8]| {
    // First byte picks the SH degree, the rest is the record.
    let Some((&sel, rest)) = data.split_first() else {
        return;
    };
    let m = ArchiveManifest::new(3, (sel % 4) as usize, 0, 1);
    if let Ok(frame) = decode_record(rest, &m) {
        assert_eq!(frame.len(), 3);
        assert_eq!(encode_record(&frame, &m).unwrap().len(), rest.len());
    }
});
