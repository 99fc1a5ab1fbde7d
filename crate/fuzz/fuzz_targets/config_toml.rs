//! Arbitrary text as an experiment configuration. Parsing and validation must
//! not panic; anything that parses must survive a serialize/parse round trip.

#![no_main]

use bodycal::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let Ok(cfg) = ExperimentConfig::from_toml_str(&text) else {
        return;
    };
    let _ = cfg.build();
    if let Ok(again) = cfg.to_toml_string() {
        let back = ExperimentConfig::from_toml_str(&again).expect("serialized config parses");
        assert_eq!(back.to_toml_string().ok(), Some(again));
    }
});
