#![no_main]

use libfuzzer_sys::fuzz_target;
use warmsplat::track::{track_from_json, track_to_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(cams) = track_from_json(data) {
        let text = track_to_json(&cams).unwrap();
        assert_eq!(track_from_json(text.as_bytes()).unwrap().len(), cams.len());
    }
});
