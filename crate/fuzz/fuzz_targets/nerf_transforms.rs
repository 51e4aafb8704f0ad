#![no_main]

use libfuzzer_sys::fuzz_target;
use warmsplat::nerf::decode_transforms;

fuzz_target!(|data: &[u8]| {
    let _ = decode_transforms(data);
});
