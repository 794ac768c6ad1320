#![no_main]

use libfuzzer_sys::fuzz_target;
use swarm_lattice::io::{parse_config_csv, write_config_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config_csv(text) {
        let mut buf = Vec::new();
        write_config_csv(&mut buf, &config).unwrap();
        let back = parse_config_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, config);
    }
});
