#![no_main]

use libfuzzer_sys::fuzz_target;
use optverify::config::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = PipelineConfig::from_toml_str(text) {
        assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }
});
