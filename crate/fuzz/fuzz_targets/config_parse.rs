#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = arraysep_cli::config::parse_config(text) {
        // Accepted configs must hash and round-trip.
        let h = arraysep_cli::config::config_hash(&cfg);
        assert_eq!(h.len(), 16);
        let json = serde_json::to_string(&cfg).unwrap();
        let back = arraysep_cli::config::parse_config(&json).unwrap();
        assert_eq!(arraysep_cli::config::config_hash(&back), h);
    }
});
