#![no_main]
use libfuzzer_sys::fuzz_target;
use sbm_gof::io::{parse_blocks, write_blocks};

fuzz_target!(|text: &str| {
    if let Ok(z) = parse_blocks(text, None) {
        assert_eq!(z.sizes().iter().sum::<usize>(), z.n());
        let again = parse_blocks(&write_blocks(&z), Some(z.k())).expect("written blocks must parse");
        assert_eq!(again, z);
    }
});
