//! Replays the checked-in fuzz corpus through the same checks as the fuzz
//! targets, so the seeds stay meaningful without cargo-fuzz.

use std::path::PathBuf;

use sbm_gof::io::{
    parse_blocks, parse_edge_list, parse_experiment_configs, parse_move, parse_params, parse_simulation_config,
    write_blocks, write_edge_list,
};
use sbm_gof::BlockAssignment;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

/// Runs `check` on every seed and compares acceptance with the expected set.
fn replay(target: &str, accepted: &[&str], check: impl Fn(&str) -> bool) {
    for (name, text) in seeds(target) {
        let ok = check(&text);
        assert_eq!(ok, accepted.contains(&name.as_str()), "{target}/{name}");
    }
}

#[test]
fn edge_list_seeds() {
    replay("edge_list", &["seed-comments", "seed-fixture", "seed-isolated"], |text| match parse_edge_list(text) {
        Ok(g) => {
            assert_eq!(parse_edge_list(&write_edge_list(&g)).unwrap(), g);
            true
        }
        Err(_) => false,
    });
}

#[test]
fn blocks_seeds() {
    replay("blocks", &["seed-comments", "seed-json", "seed-lines"], |text| match parse_blocks(text, None) {
        Ok(z) => {
            assert_eq!(parse_blocks(&write_blocks(&z), Some(z.k())).unwrap(), z);
            true
        }
        Err(_) => false,
    });
}

#[test]
fn params_seeds() {
    replay("params", &["seed-add", "seed-beta", "seed-er"], |text| match parse_params(text) {
        Ok(p) => {
            let _ = p.validate(&BlockAssignment::single(2));
            assert_eq!(parse_params(&serde_json::to_string(&p).unwrap()).unwrap(), p);
            p.validate(&BlockAssignment::new(2, vec![0, 1]).unwrap()).is_ok()
        }
        Err(_) => false,
    });
}

#[test]
fn move_seeds() {
    replay("move_json", &["seed-cubic", "seed-linear", "seed-quadratic"], |text| match parse_move(text) {
        Ok(m) => {
            assert_eq!(m.reversed().reversed(), m);
            assert_eq!(parse_move(&serde_json::to_string(&m).unwrap()).unwrap(), m);
            true
        }
        Err(_) => false,
    });
}

#[test]
fn simulation_config_seeds() {
    replay("simulation_config", &["seed-add-vector", "seed-beta", "seed-er"], |text| {
        match parse_simulation_config(text) {
            Ok(c) => {
                assert_eq!(parse_simulation_config(&serde_json::to_string(&c).unwrap()).unwrap(), c);
                true
            }
            Err(_) => false,
        }
    });
}

#[test]
fn experiment_config_seeds() {
    replay("experiment_config", &["seed-many", "seed-one", "seed-options"], |text| {
        parse_experiment_configs(text).is_ok()
    });
}
