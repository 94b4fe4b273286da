#![no_main]
use libfuzzer_sys::fuzz_target;
use sbm_gof::io::parse_params;

fuzz_target!(|text: &str| {
    if let Ok(p) = parse_params(text) {
        let _ = p.validate(&sbm_gof::BlockAssignment::single(2));
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(parse_params(&json).unwrap(), p);
    }
});
