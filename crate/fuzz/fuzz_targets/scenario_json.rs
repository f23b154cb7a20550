#![no_main]

use libfuzzer_sys::fuzz_target;
use optverify::ScenarioInstance;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Anything that validates must survive a round trip.
    if let Ok(inst) = ScenarioInstance::from_json_str(text) {
        let again = ScenarioInstance::from_json_str(&inst.to_json_pretty()).unwrap();
        assert_eq!(again, inst);
    }
});
