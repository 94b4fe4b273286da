#![no_main]
use libfuzzer_sys::fuzz_target;
use sbm_gof::io::parse_move;

fuzz_target!(|text: &str| {
    if let Ok(m) = parse_move(text) {
        assert!(m.is_well_formed());
        assert_eq!(m.reversed().reversed(), m);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(parse_move(&json).unwrap(), m);
    }
});
