#![no_main]

use libfuzzer_sys::fuzz_target;
use nhwork::cli;
use nhwork::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let args = std::iter::once("nhwork").chain(text.split_whitespace());
    if let Ok(parsed) = cli::parse(args) {
        // resolving would read --config from disk; apply the flags only
        let mut config = ExperimentConfig::default();
        config.apply(&parsed.overrides());
        if config.validate().is_ok() {
            ExperimentConfig::from_json(&config.to_json()).expect("validated config round-trips");
        }
    }
});
