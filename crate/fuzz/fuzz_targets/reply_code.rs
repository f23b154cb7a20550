#![no_main]

use libfuzzer_sys::fuzz_target;
use optverify::llm::{extract_code, parse_extracted_record};

fuzz_target!(|data: &[u8]| {
    let reply = String::from_utf8_lossy(data);
    let _ = extract_code(&reply);
    if let Some(record) = parse_extracted_record(&reply) {
        assert!(record.is_object());
    }
});
