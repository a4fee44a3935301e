#![no_main]

use libfuzzer_sys::fuzz_target;
use taxilim::config::{config_digest, parse_config, serialize_config};

// The parser must never panic, and any accepted config must survive a
// canonical serialize -> reparse round trip with a stable digest.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        let canon = serialize_config(&cfg);
        let again = parse_config(&canon).expect("canonical form reparses");
        assert_eq!(cfg, again);
        assert_eq!(config_digest(&cfg), config_digest(&again));
    }
});
