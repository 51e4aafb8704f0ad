#![no_main]

use libfuzzer_sys::fuzz_target;
use warmsplat::dataset::DatasetManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = serde_json::from_slice::<DatasetManifest>(data) {
        for c in &m.cameras {
            let _ = c.to_camera();
        }
    }
});
