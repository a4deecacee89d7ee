#![no_main]

use libfuzzer_sys::fuzz_target;
use nhwork::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ExperimentConfig::from_json(text) {
        let once = config.to_json();
        let again = ExperimentConfig::from_json(&once).expect("serialized config parses");
        assert_eq!(again.to_json(), once);
    }
});
