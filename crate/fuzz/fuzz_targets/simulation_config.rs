#![no_main]
use libfuzzer_sys::fuzz_target;
use sbm_gof::io::parse_simulation_config;

fuzz_target!(|text: &str| {
    if let Ok(c) = parse_simulation_config(text) {
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(parse_simulation_config(&json).unwrap(), c);
    }
});
