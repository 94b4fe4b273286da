//! Goodness-of-fit statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{degrees_into_blocks, BlockAssignment, Graph};
use crate::models::DyadProbs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GofKind {
    /// Block-corrected chi-square over per-node block-neighbour counts.
    #[serde(rename = "chi2-bc")]
    ChiSqBC,
    /// Pearson chi-square over dyads.
    #[serde(rename = "pearson")]
    ChiSqPearson,
}

impl std::str::FromStr for GofKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<GofKind> {
        match s.to_ascii_lowercase().as_str() {
            "chi2-bc" | "chi2bc" | "bc" => Ok(GofKind::ChiSqBC),
            "pearson" | "chi2-pearson" => Ok(GofKind::ChiSqPearson),
            other => Err(Error::Parse(format!("unknown goodness-of-fit statistic `{other}`"))),
        }
    }
}

impl std::fmt::Display for GofKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GofKind::ChiSqBC => "chi2-bc",
            GofKind::ChiSqPearson => "pearson",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofValue {
    pub kind: GofKind,
    pub value: f64,
}

/// `Σ_u Σ_i (m_ui − n_i q̂_{z(u) i})² / (n_i q̂_{z(u) i})`.
///
/// The own-block expected count uses `n_i`, not `n_i − 1`. Cells with zero
/// expected and zero observed count contribute nothing.
pub fn chi2_bc(g: &Graph, z: &BlockAssignment, qhat: &[Vec<f64>]) -> Result<GofValue> {
    let k = z.k();
    if qhat.len() != k || qhat.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, found: qhat.len() });
    }
    if qhat.iter().flatten().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::InvalidParams("q-hat entries must lie in [0,1]".into()));
    }
    let m = degrees_into_blocks(g, z)?;
    let sizes = z.sizes();
    let mut value = 0.0;
    for (u, row) in m.iter().enumerate() {
        let a = z.block(u);
        for (i, &obs) in row.iter().enumerate() {
            let expected = sizes[i] as f64 * qhat[a][i];
            let obs = obs as f64;
            if expected == 0.0 {
                if obs > 0.0 {
                    return Err(Error::ZeroExpected {
                        observed: obs,
                        context: format!("node {}, block {}", u + 1, i + 1),
                    });
                }
                continue;
            }
            value += (obs - expected).powi(2) / expected;
        }
    }
    Ok(GofValue { kind: GofKind::ChiSqBC, value })
}

/// `Σ_{u<v} (ĝ_uv − g_uv)² / ĝ_uv`.
pub fn chi2_pearson(g: &Graph, fitted: &DyadProbs) -> Result<GofValue> {
    if fitted.n != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), found: fitted.n });
    }
    let mut value = 0.0;
    for (idx, &p) in fitted.p.iter().enumerate() {
        let obs = if g.has_index(idx) { 1.0 } else { 0.0 };
        if p == 0.0 {
            if obs > 0.0 {
                let d = g.dyad_at(idx);
                return Err(Error::ZeroExpected {
                    observed: obs,
                    context: format!("dyad {{{},{}}}", d.u() + 1, d.v() + 1),
                });
            }
            continue;
        }
        value += (p - obs).powi(2) / p;
    }
    Ok(GofValue { kind: GofKind::ChiSqPearson, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{mle_er, ModelParams};

    #[test]
    fn bc_perfect_fit_is_zero() {
        let g = Graph::from_edges_1based(4, [(1, 3), (2, 4)]).unwrap();
        let z = BlockAssignment::from_blocks(4, &[&[1, 2], &[3, 4]]).unwrap();
        let q = mle_er(&g, &z).unwrap().q;
        assert_eq!(q[0][1], 0.5);
        assert_eq!(chi2_bc(&g, &z, &q).unwrap().value, 0.0);
    }

    #[test]
    fn bc_figure_brute_force() {
        let g = Graph::from_edges_1based(6, [(2, 5), (3, 6), (1, 5), (1, 3), (2, 4), (3, 4), (5, 6)])
            .unwrap();
        let z = BlockAssignment::from_blocks(6, &[&[1, 2], &[3, 4, 5], &[6]]).unwrap();
        let q = mle_er(&g, &z).unwrap().q;
        let mut brute = 0.0;
        for u in 0..6 {
            for i in 0..3 {
                let m = (0..6).filter(|&v| z.block(v) == i && g.adjacent(u, v)).count() as f64;
                let e = z.sizes()[i] as f64 * q[z.block(u)][i];
                if e > 0.0 {
                    brute += (m - e) * (m - e) / e;
                }
            }
        }
        let v = chi2_bc(&g, &z, &q).unwrap().value;
        assert!((v - brute).abs() < 1e-12);
        assert!(v > 0.0);
    }

    #[test]
    fn bc_zero_expected_positive_observed() {
        let g = Graph::from_edges_1based(4, [(1, 3)]).unwrap();
        let z = BlockAssignment::from_blocks(4, &[&[1, 2], &[3, 4]]).unwrap();
        let q = vec![vec![0.0; 2]; 2];
        assert!(matches!(chi2_bc(&g, &z, &q), Err(Error::ZeroExpected { .. })));
    }

    #[test]
    fn pearson_cases() {
        let g = Graph::from_edges_1based(2, [(1, 2)]).unwrap();
        let half = DyadProbs { n: 2, p: vec![0.5] };
        assert_eq!(chi2_pearson(&g, &half).unwrap().value, 0.5);
        let exact = DyadProbs { n: 2, p: vec![1.0] };
        assert_eq!(chi2_pearson(&g, &exact).unwrap().value, 0.0);
        let zero = DyadProbs { n: 2, p: vec![0.0] };
        assert!(chi2_pearson(&g, &zero).is_err());
        assert_eq!(chi2_pearson(&Graph::empty(2), &zero).unwrap().value, 0.0);
    }

    #[test]
    fn pearson_exact_fit_on_block_graph() {
        // Two cliques joined by nothing: the ER fit is 0/1 everywhere.
        let g = Graph::from_edges_1based(6, [(1, 2), (1, 3), (2, 3), (4, 5), (4, 6), (5, 6)]).unwrap();
        let z = BlockAssignment::from_blocks(6, &[&[1, 2, 3], &[4, 5, 6]]).unwrap();
        let fitted = ModelParams::Er(mle_er(&g, &z).unwrap()).dyad_probs(&z).unwrap();
        assert_eq!(chi2_pearson(&g, &fitted).unwrap().value, 0.0);
    }
}
