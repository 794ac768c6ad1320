#![no_main]

use libfuzzer_sys::fuzz_target;
use swarm_lattice::io::{config_to_json, parse_config_json};

fuzz_target!(|data: &str| {
    if let Ok(config) = parse_config_json(data) {
        let back = parse_config_json(&config_to_json(&config).unwrap()).unwrap();
        assert_eq!(back, config);
    }
});
