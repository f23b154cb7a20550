#![no_main]

use libfuzzer_sys::fuzz_target;
use optverify::l2::perturb::{literal_sites, perturb_source};

// First line is the parameter name, the rest is program text.
fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let (key, src) = text.split_once('\n').unwrap_or(("capacity", &text));
    let _ = literal_sites(src);
    if let Some(out) = perturb_source(src, key, 0.001) {
        assert_ne!(out, src);
    }
});
