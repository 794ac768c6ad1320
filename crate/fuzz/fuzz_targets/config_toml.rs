//! Experiment configuration parser: no panics, and accepted files survive a
//! serialize/parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use swarm_lattice::config::ExperimentConfig;

fuzz_target!(|data: &str| {
    if let Ok(config) = ExperimentConfig::from_toml_str(data) {
        let text = config.to_toml_string().expect("valid config serializes");
        let again = ExperimentConfig::from_toml_str(&text).expect("serialized config parses");
        assert_eq!(again, config);
    }
});
