#![no_main]

use libfuzzer_sys::fuzz_target;
use warmsplat::colmap::decode_colmap;

// Input is cameras.txt, images.txt and points3D.txt separated by NUL bytes.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut parts = text.splitn(3, '\0');
    let cams = parts.next().unwrap_or("");
    let images = parts.next().unwrap_or("");
    let points = parts.next().unwrap_or("");
    let _ = decode_colmap(cams, images, points);
});
