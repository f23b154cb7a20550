#![no_main]

use libfuzzer_sys::fuzz_target;
use optverify::eval::{self, EvalRecord, Prediction};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = eval::parse_jsonl::<Prediction>(&text);
    if let Ok(records) = eval::parse_jsonl::<EvalRecord>(&text) {
        if let Ok(report) = eval::aggregate(&records) {
            let _ = eval::render_table(&report);
        }
    }
});
