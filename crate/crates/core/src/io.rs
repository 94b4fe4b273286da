//! Text formats for graphs and block assignments.
//!
//! Edge list: one `u v` pair per line, whitespace separated, 1-based labels.
//! `#` starts a comment. An optional `n=<int>` line fixes the node count;
//! otherwise it is the largest label seen.
//!
//! Block file: either one 1-based block label per line (line `i` is node `i`,
//! blank and comment lines skipped) or a JSON array of labels. The block
//! count is the largest label unless given explicitly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::GofKind;
use crate::graph::{BlockAssignment, Graph};
use crate::models::ModelParams;
use crate::moves::Move;
use crate::synth::{ExperimentConfig, SimulationConfig};
use crate::testing::TestReport;

/// Upper bound on the node count accepted from text input. The adjacency bit
/// array for this many nodes takes about 25 MB.
pub const MAX_NODES: usize = 20_000;

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_label(tok: &str, lineno: usize) -> Result<usize> {
    let v: usize = tok
        .parse()
        .map_err(|_| Error::Parse(format!("line {lineno}: `{tok}` is not a node label")))?;
    if v == 0 {
        return Err(Error::Parse(format!("line {lineno}: labels are 1-based")));
    }
    if v > MAX_NODES {
        return Err(Error::Parse(format!("line {lineno}: label {v} exceeds {MAX_NODES}")));
    }
    Ok(v)
}

pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_label = 0;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("n=").or_else(|| line.strip_prefix("n =")) {
            if declared.is_some() || !edges.is_empty() {
                return Err(Error::Parse(format!("line {lineno}: header must come first")));
            }
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad node count `{}`", rest.trim())))?;
            if n > MAX_NODES {
                return Err(Error::Parse(format!("line {lineno}: n exceeds {MAX_NODES}")));
            }
            declared = Some(n);
            continue;
        }
        let mut toks = line.split_whitespace();
        let (a, b) = match (toks.next(), toks.next(), toks.next()) {
            (Some(a), Some(b), None) => (parse_label(a, lineno)?, parse_label(b, lineno)?),
            _ => return Err(Error::Parse(format!("line {lineno}: expected `u v`"))),
        };
        if a == b {
            return Err(Error::Parse(format!("line {lineno}: self-loop at node {a}")));
        }
        max_label = max_label.max(a).max(b);
        edges.push((a, b));
    }
    let n = match declared {
        Some(n) if n < max_label => {
            return Err(Error::NodeOutOfRange { node: max_label, n });
        }
        Some(n) => n,
        None => max_label,
    };
    Graph::from_edges_1based(n, edges)
}

pub fn write_edge_list(g: &Graph) -> String {
    let mut s = format!("n={}\n", g.n());
    for d in g.edges() {
        s.push_str(&format!("{} {}\n", d.u() + 1, d.v() + 1));
    }
    s
}

/// Parses a block file. `k = None` takes the largest label as the block count.
pub fn parse_blocks(text: &str, k: Option<usize>) -> Result<BlockAssignment> {
    let trimmed = text.trim_start();
    let labels: Vec<usize> = if trimmed.starts_with('[') {
        let raw: Vec<usize> = serde_json::from_str(trimmed)?;
        for &b in &raw {
            if b == 0 || b > MAX_NODES {
                return Err(Error::Parse(format!("block label {b} out of range")));
            }
        }
        raw
    } else {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            out.push(parse_label(line, i + 1)?);
        }
        out
    };
    if labels.is_empty() {
        return Err(Error::Parse("block file has no labels".into()));
    }
    if labels.len() > MAX_NODES {
        return Err(Error::Parse("too many nodes".into()));
    }
    let max = labels.iter().copied().max().unwrap_or(0);
    let k = match k {
        Some(k) if k < max => {
            return Err(Error::InvalidAssignment(format!("label {max} exceeds k = {k}")));
        }
        Some(k) => k,
        None => max.max(1),
    };
    BlockAssignment::from_1based(k, &labels)
}

pub fn write_blocks(z: &BlockAssignment) -> String {
    z.to_1based().iter().map(|b| format!("{b}\n")).collect()
}

/// Model parameters as JSON, e.g. `{"model":"er","q":[[0.6,0.1],[0.1,0.6]]}`.
pub fn parse_params(text: &str) -> Result<ModelParams> {
    Ok(serde_json::from_str(text)?)
}

/// A move as JSON: `{"add":[[2,3]],"remove":[[1,5]]}` with 1-based dyads.
pub fn parse_move(text: &str) -> Result<Move> {
    let m: Move = serde_json::from_str(text)?;
    if !m.is_well_formed() {
        return Err(Error::Parse("move adds and removes overlapping or repeated dyads".into()));
    }
    Ok(m)
}

pub fn parse_simulation_config(text: &str) -> Result<SimulationConfig> {
    let c: SimulationConfig = serde_json::from_str(text)?;
    c.generator()?;
    Ok(c)
}

/// One experiment cell, or an array of cells.
pub fn parse_experiment_configs(text: &str) -> Result<Vec<ExperimentConfig>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<ExperimentConfig>),
        One(Box<ExperimentConfig>),
    }
    let configs = match serde_json::from_str(text)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(c) => vec![*c],
    };
    for c in &configs {
        c.simulation.generator()?;
    }
    Ok(configs)
}

/// Metadata written next to a column of sampled statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofSidecar {
    pub statistic: GofKind,
    pub observed: Option<f64>,
    pub fiber_id: usize,
    pub weight: f64,
    pub p_value: f64,
    pub assignment: Vec<usize>,
}

/// Single-column CSV of sampled statistics; infinite values are written as `inf`.
pub fn gof_csv(samples: &[f64]) -> String {
    let mut s = String::from("gof\n");
    for v in samples {
        if v.is_infinite() {
            s.push_str("inf\n");
        } else {
            s.push_str(&format!("{v}\n"));
        }
    }
    s
}

/// One `(csv, sidecar)` pair per fiber of a report.
pub fn report_gof_files(report: &TestReport) -> Vec<(String, GofSidecar)> {
    report
        .fibers
        .iter()
        .map(|f| {
            let side = GofSidecar {
                statistic: report.gof,
                observed: f.observed,
                fiber_id: f.fiber_id,
                weight: f.weight,
                p_value: f.p_value,
                assignment: f.assignment.clone(),
            };
            (gof_csv(&f.samples), side)
        })
        .collect()
}

/// A 20-bin text histogram of the finite values, marking the observed bin.
pub fn text_histogram(samples: &[f64], observed: Option<f64>, width: usize) -> String {
    const BINS: usize = 20;
    let finite: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return "(no finite samples)\n".into();
    }
    let mut lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(o) = observed.filter(|o| o.is_finite()) {
        lo = lo.min(o);
        hi = hi.max(o);
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let bin = |v: f64| (((v - lo) / span * BINS as f64) as usize).min(BINS - 1);
    let mut counts = [0usize; BINS];
    for &v in &finite {
        counts[bin(v)] += 1;
    }
    let max = *counts.iter().max().unwrap();
    let obs_bin = observed.filter(|o| o.is_finite()).map(bin);
    let mut out = String::new();
    for (i, &c) in counts.iter().enumerate() {
        let left = lo + span * i as f64 / BINS as f64;
        let bar = "#".repeat((c * width).checked_div(max).unwrap_or(0));
        let mark = if obs_bin == Some(i) { " <- observed" } else { "" };
        out.push_str(&format!("{left:>12.4} | {bar:<width$} {c}{mark}\n"));
    }
    let inf = samples.len() - finite.len();
    if inf > 0 {
        out.push_str(&format!("{inf} infinite samples\n"));
    }
    out
}
