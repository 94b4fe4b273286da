//! Membership in the ER and additive model polytopes.
//!
//! The MLE of an exponential family exists iff the observed sufficient
//! statistic lies in the relative interior of the model polytope. Both
//! polytopes here have explicit inequality descriptions, evaluated exactly in
//! integer arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{choose2, BlockAssignment, Graph, Model, SufficientStatistics};

/// Largest block count accepted by [`add_membership`]; there are `3^k − 1` inequalities.
pub const MAX_ADD_BLOCKS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Interior,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintStatus {
    Active,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `t_ij >= 0` (lower) or `t_ij <= capacity` (upper); blocks are 1-based.
    ErBound { blocks: (usize, usize), upper: bool, bound: u64, value: u64, status: ConstraintStatus },
    /// `Σ_T x − Σ_S x <= rhs`; blocks are 1-based.
    AddInequality { t: Vec<usize>, s: Vec<usize>, lhs: i64, rhs: i64, status: ConstraintStatus },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub verdict: Verdict,
    /// Active or violated constraints.
    pub tight: Vec<Constraint>,
    /// Additive model only: the degree total is even, as for any graph.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity_ok: Option<bool>,
}

impl MembershipVerdict {
    fn from_constraints(tight: Vec<Constraint>, parity_ok: Option<bool>) -> MembershipVerdict {
        let violated = tight.iter().any(|c| {
            matches!(
                c,
                Constraint::ErBound { status: ConstraintStatus::Violated, .. }
                    | Constraint::AddInequality { status: ConstraintStatus::Violated, .. }
            )
        });
        let verdict = if violated {
            Verdict::Outside
        } else if tight.is_empty() {
            Verdict::Interior
        } else {
            Verdict::Boundary
        };
        MembershipVerdict { verdict, tight, parity_ok }
    }

    pub fn is_interior(&self) -> bool {
        self.verdict == Verdict::Interior
    }
}

fn values_of(t: &SufficientStatistics, expected: Model) -> Result<&[u64]> {
    if t.model != expected {
        return Err(Error::Unsupported(format!("expected {expected} statistics, got {}", t.model)));
    }
    Ok(&t.values)
}

/// Box constraints `0 <= t_ij <= n_i n_j`, `0 <= t_ii <= C(n_i, 2)`.
pub fn er_membership(t: &SufficientStatistics, sizes: &[usize]) -> Result<MembershipVerdict> {
    let values = values_of(t, Model::Er)?;
    let k = sizes.len();
    if values.len() != k * (k + 1) / 2 {
        return Err(Error::DimensionMismatch { expected: k * (k + 1) / 2, found: values.len() });
    }
    let mut tight = Vec::new();
    let mut c = 0;
    for i in 0..k {
        for j in i..k {
            let cap = if i == j { choose2(sizes[i]) } else { sizes[i] * sizes[j] } as u64;
            let x = values[c];
            let blocks = (i + 1, j + 1);
            if x == 0 {
                tight.push(Constraint::ErBound { blocks, upper: false, bound: 0, value: x, status: ConstraintStatus::Active });
            }
            if x >= cap {
                let status = if x > cap { ConstraintStatus::Violated } else { ConstraintStatus::Active };
                tight.push(Constraint::ErBound { blocks, upper: true, bound: cap, value: x, status });
            }
            c += 1;
        }
    }
    Ok(MembershipVerdict::from_constraints(tight, None))
}

/// Evaluates every inequality
/// `Σ_{T} x_i − Σ_{S} x_i <= 2·C(N_T, 2) + N_T·N_R`, where `T`, `S` are
/// disjoint block sets, not both empty, `N_T` is the node count of `T` and
/// `N_R` that of the remaining blocks.
pub fn add_membership(t: &SufficientStatistics, sizes: &[usize]) -> Result<MembershipVerdict> {
    let values = values_of(t, Model::Add)?;
    let k = sizes.len();
    if values.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: values.len() });
    }
    if k > MAX_ADD_BLOCKS {
        return Err(Error::Unsupported(format!("additive polytope check limited to k <= {MAX_ADD_BLOCKS}")));
    }
    let total_nodes: i64 = sizes.iter().map(|&s| s as i64).sum();
    let mut tight = Vec::new();
    // Base-3 code per block: 0 = rest, 1 = T, 2 = S.
    let combos = 3usize.pow(k as u32);
    for code in 1..combos {
        let mut rem = code;
        let (mut lhs, mut n_t, mut n_s) = (0i64, 0i64, 0i64);
        let (mut ts, mut ss) = (Vec::new(), Vec::new());
        for i in 0..k {
            match rem % 3 {
                1 => {
                    lhs += values[i] as i64;
                    n_t += sizes[i] as i64;
                    ts.push(i + 1);
                }
                2 => {
                    lhs -= values[i] as i64;
                    n_s += sizes[i] as i64;
                    ss.push(i + 1);
                }
                _ => {}
            }
            rem /= 3;
        }
        let n_r = total_nodes - n_t - n_s;
        let rhs = n_t * (n_t - 1) + n_t * n_r;
        if lhs >= rhs {
            let status = if lhs > rhs { ConstraintStatus::Violated } else { ConstraintStatus::Active };
            tight.push(Constraint::AddInequality { t: ts, s: ss, lhs, rhs, status });
        }
    }
    let parity_ok = values.iter().sum::<u64>() % 2 == 0;
    Ok(MembershipVerdict::from_constraints(tight, Some(parity_ok)))
}

/// MLE existence for the ER or additive model via polytope membership.
pub fn mle_exists(model: Model, g: &Graph, z: &BlockAssignment) -> Result<(bool, MembershipVerdict)> {
    z.check_graph(g)?;
    z.require_nonempty()?;
    let t = SufficientStatistics::compute(model, g, z)?;
    let verdict = match model {
        Model::Er => er_membership(&t, z.sizes())?,
        Model::Add => add_membership(&t, z.sizes())?,
        Model::Beta => {
            return Err(Error::Unsupported(
                "β-SBM polytope membership is not available; existence is detected by the fitter".into(),
            ))
        }
    };
    Ok((verdict.is_interior(), verdict))
}
