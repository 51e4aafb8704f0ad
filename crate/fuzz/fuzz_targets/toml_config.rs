#![no_main]

use libfuzzer_sys::fuzz_target;
use warmsplat::config::{GenerateConfig, TrainFileConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = GenerateConfig::from_toml(text);
    let _ = TrainFileConfig::from_toml(text);
});
