#![no_main]

use libfuzzer_sys::fuzz_target;
use optverify::l2::extract::{parse_constraints, parse_objective_terms};

fuzz_target!(|data: &[u8]| {
    let reply = String::from_utf8_lossy(data);
    if let Ok(found) = parse_constraints(&reply, 10) {
        assert!(found.len() <= 10);
    }
    if let Ok(found) = parse_objective_terms(&reply, 10) {
        assert!(found.len() <= 10);
    }
});
