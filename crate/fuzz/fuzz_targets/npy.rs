#![no_main]

use libfuzzer_sys::fuzz_target;
use warmsplat::npy::decode_f32_2d;

fuzz_target!(|data: &[u8]| {
    if let Ok(a) = decode_f32_2d(data) {
        assert_eq!(a.data.len(), a.rows * a.cols);
    }
});
