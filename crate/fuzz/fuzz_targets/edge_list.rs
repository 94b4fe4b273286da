#![no_main]
use libfuzzer_sys::fuzz_target;
use sbm_gof::io::{parse_edge_list, write_edge_list};

fuzz_target!(|text: &str| {
    if let Ok(g) = parse_edge_list(text) {
        let again = parse_edge_list(&write_edge_list(&g)).expect("written edge list must parse");
        assert_eq!(again, g);
    }
});
