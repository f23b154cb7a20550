#![no_main]

use libfuzzer_sys::fuzz_target;
use optverify::runtime::parse_contract;

fuzz_target!(|data: &[u8]| {
    let stdout = String::from_utf8_lossy(data);
    let lines = parse_contract(&stdout);
    if let Some(z) = lines.objective {
        assert!(!z.is_nan());
    }
});
