#![no_main]
use libfuzzer_sys::fuzz_target;
use sbm_gof::io::parse_experiment_configs;

fuzz_target!(|text: &str| {
    let _ = parse_experiment_configs(text);
});
