//! Edge-probability parametrizations of the ER, additive and β block models,
//! and their maximum likelihood estimators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{choose2, t_er, BlockAssignment, Dyad, Graph, Model};

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// One edge probability per unordered block pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErParams {
    pub q: Vec<Vec<f64>>,
    /// Blocks of size one: their diagonal entry has no dyads and is stored as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined_diagonal: Vec<usize>,
}

/// Block parameters whose pairwise sums give the edge log-odds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddParams {
    pub alpha: Vec<f64>,
}

/// Block-pair log-odds plus per-node degree parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    Er(ErParams),
    Add(AddParams),
    Beta(BetaParams),
}

impl ErParams {
    pub fn new(q: Vec<Vec<f64>>) -> Result<ErParams> {
        let p = ErParams { q, undefined_diagonal: Vec::new() };
        p.validate()?;
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.q.len();
        for (i, row) in self.q.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidParams("Q must be square".into()));
            }
            for (j, &x) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::InvalidParams(format!("q[{}][{}] = {x} not in [0,1]", i + 1, j + 1)));
                }
                if (x - self.q[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidParams("Q must be symmetric".into()));
                }
            }
        }
        Ok(())
    }
}

impl AddParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.iter().all(|a| a.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParams("non-finite additive parameter".into()))
        }
    }
}

impl BetaParams {
    pub fn validate(&self) -> Result<()> {
        let k = self.alpha.len();
        for (i, row) in self.alpha.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidParams("alpha must be square".into()));
            }
            for (j, &a) in row.iter().enumerate() {
                if !a.is_finite() || (a - self.alpha[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidParams("alpha must be finite and symmetric".into()));
                }
            }
        }
        if !self.beta.iter().all(|b| b.is_finite()) {
            return Err(Error::InvalidParams("non-finite beta".into()));
        }
        Ok(())
    }
}

impl ModelParams {
    pub fn model(&self) -> Model {
        match self {
            ModelParams::Er(_) => Model::Er,
            ModelParams::Add(_) => Model::Add,
            ModelParams::Beta(_) => Model::Beta,
        }
    }

    pub fn validate(&self, z: &BlockAssignment) -> Result<()> {
        let k = match self {
            ModelParams::Er(p) => {
                p.validate()?;
                p.k()
            }
            ModelParams::Add(p) => {
                p.validate()?;
                p.alpha.len()
            }
            ModelParams::Beta(p) => {
                p.validate()?;
                if p.beta.len() != z.n() {
                    return Err(Error::DimensionMismatch { expected: z.n(), found: p.beta.len() });
                }
                p.alpha.len()
            }
        };
        if k != z.k() {
            return Err(Error::DimensionMismatch { expected: z.k(), found: k });
        }
        Ok(())
    }

    /// Probability of the edge `{u, v}`.
    pub fn edge_prob(&self, z: &BlockAssignment, u: usize, v: usize) -> Result<f64> {
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if u >= z.n() || v >= z.n() {
            return Err(Error::NodeOutOfRange { node: u.max(v) + 1, n: z.n() });
        }
        Ok(self.edge_prob_unchecked(z, u, v))
    }

    #[inline]
    fn edge_prob_unchecked(&self, z: &BlockAssignment, u: usize, v: usize) -> f64 {
        let (a, b) = (z.block(u), z.block(v));
        match self {
            ModelParams::Er(p) => p.q[a][b],
            ModelParams::Add(p) => logistic(p.alpha[a] + p.alpha[b]),
            ModelParams::Beta(p) => logistic(p.alpha[a][b] + p.beta[u] + p.beta[v]),
        }
    }

    /// Edge probabilities of every dyad.
    pub fn dyad_probs(&self, z: &BlockAssignment) -> Result<DyadProbs> {
        self.validate(z)?;
        let n = z.n();
        let g = Graph::empty(n);
        let p = g.dyads().map(|d| self.edge_prob_unchecked(z, d.u(), d.v())).collect();
        Ok(DyadProbs { n, p })
    }
}

/// Per-dyad probabilities in canonical dyad order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadProbs {
    pub n: usize,
    pub p: Vec<f64>,
}

impl DyadProbs {
    pub fn get(&self, g: &Graph, d: Dyad) -> f64 {
        self.p[g.dyad_index(d)]
    }
}

/// ER block-model MLE: observed block-pair densities.
pub fn mle_er(g: &Graph, z: &BlockAssignment) -> Result<ErParams> {
    z.check_graph(g)?;
    z.require_nonempty()?;
    let t = t_er(g, z)?.values;
    let cap = z.class_capacity();
    let k = z.k();
    let mut q = vec![vec![0.0; k]; k];
    let mut undefined_diagonal = Vec::new();
    for i in 0..k {
        for j in i..k {
            let c = z.class_index(i, j);
            if cap[c] == 0 {
                undefined_diagonal.push(i);
                continue;
            }
            q[i][j] = t[c] as f64 / cap[c] as f64;
            q[j][i] = q[i][j];
        }
    }
    Ok(ErParams { q, undefined_diagonal })
}

/// A single entry of the ER MLE; singleton diagonal entries are an error.
pub fn mle_er_entry(g: &Graph, z: &BlockAssignment, i: usize, j: usize) -> Result<f64> {
    let p = mle_er(g, z)?;
    if i >= z.k() || j >= z.k() {
        return Err(Error::DimensionMismatch { expected: z.k(), found: i.max(j) + 1 });
    }
    if i == j && p.undefined_diagonal.contains(&i) {
        return Err(Error::SingletonBlock(i + 1));
    }
    Ok(p.q[i][j])
}

/// Additive-model estimator `m_ij / C(n,2)` with `m_ij` the edge count between
/// blocks `i` and `j` (within-block count on the diagonal).
pub fn mle_add(g: &Graph, z: &BlockAssignment) -> Result<Vec<Vec<f64>>> {
    z.check_graph(g)?;
    if g.n() < 2 {
        return Err(Error::InvalidParams("additive estimator needs n >= 2".into()));
    }
    let t = t_er(g, z)?.values;
    let denom = choose2(g.n()) as f64;
    let k = z.k();
    let mut q = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = t[z.class_index(i, j)] as f64 / denom;
            q[i][j] = v;
            q[j][i] = v;
        }
    }
    Ok(q)
}

/// Bernoulli log-likelihood. Returns `-inf` when a 0/1 probability contradicts
/// an observed dyad.
pub fn loglik_probs(g: &Graph, probs: &DyadProbs) -> Result<f64> {
    if probs.n != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), found: probs.n });
    }
    let mut ll = 0.0;
    for (idx, &p) in probs.p.iter().enumerate() {
        let q = if g.has_index(idx) { p } else { 1.0 - p };
        if q <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll += q.ln();
    }
    Ok(ll)
}

pub fn loglik(g: &Graph, z: &BlockAssignment, params: &ModelParams) -> Result<f64> {
    z.check_graph(g)?;
    loglik_probs(g, &params.dyad_probs(z)?)
}

#[derive(Debug, Clone, Copy)]
pub struct BetaFitOptions {
    /// Max-norm tolerance on observed minus expected sufficient statistics.
    pub tol: f64,
    pub max_iter: usize,
    /// Parameters beyond this magnitude signal a boundary statistic.
    pub divergence_cap: f64,
}

impl Default for BetaFitOptions {
    fn default() -> Self {
        BetaFitOptions { tol: 1e-8, max_iter: 500, divergence_cap: 30.0 }
    }
}

/// Diagnostics of a successful β-SBM fit.
#[derive(Debug, Clone, Serialize)]
pub struct BetaFit {
    pub params: BetaParams,
    pub iterations: usize,
    pub residual: f64,
}

pub fn mle_beta(g: &Graph, z: &BlockAssignment, tol: f64, max_iter: usize) -> Result<BetaParams> {
    let opts = BetaFitOptions { tol, max_iter, ..Default::default() };
    mle_beta_with(g, z, &opts).map(|f| f.params)
}

/// Fits the β-SBM by damped Newton ascent on the log-likelihood.
///
/// Parameters: one α per block pair that has dyads, and β for every node
/// except the first of each block (pinned at zero). The pinned coordinates
/// remove the `k` directions along which the linear predictor is constant.
/// After convergence β is centred within each block and the shift is moved
/// into α.
pub fn mle_beta_with(g: &Graph, z: &BlockAssignment, opts: &BetaFitOptions) -> Result<BetaFit> {
    z.check_graph(g)?;
    z.require_nonempty()?;
    let n = g.n();
    let k = z.k();
    let nc = z.num_classes();
    let cap = z.class_capacity();
    let t = t_er(g, z)?.values;
    let deg = g.degrees();

    // Statistics on trivial faces of the polytope: no interior point.
    for c in 0..nc {
        if cap[c] > 0 && (t[c] == 0 || t[c] as usize == cap[c]) {
            let (i, j) = z.class_pair(c);
            return Err(Error::MleNonexistence(format!(
                "block pair ({},{}) has {} of {} possible edges",
                i + 1,
                j + 1,
                t[c],
                cap[c]
            )));
        }
    }
    for (u, &d) in deg.iter().enumerate() {
        if d == 0 || d == n - 1 {
            return Err(Error::MleNonexistence(format!("node {} has degree {d}", u + 1)));
        }
    }

    // Free coordinates: [alpha classes with dyads] ++ [beta of non-pinned nodes].
    let mut pinned = vec![false; n];
    for b in 0..k {
        if let Some(u) = z.members(b).next() {
            pinned[u] = true;
        }
    }
    let mut col_of_class = vec![usize::MAX; nc];
    let mut dim = 0;
    for c in 0..nc {
        if cap[c] > 0 {
            col_of_class[c] = dim;
            dim += 1;
        }
    }
    let mut col_of_node = vec![usize::MAX; n];
    for u in 0..n {
        if !pinned[u] {
            col_of_node[u] = dim;
            dim += 1;
        }
    }

    let dyads: Vec<(usize, usize, usize)> = g.dyads().map(|d| (d.u(), d.v(), z.dyad_class(d))).collect();
    let observed = {
        let mut s = DVector::zeros(dim);
        for c in 0..nc {
            if cap[c] > 0 {
                s[col_of_class[c]] = t[c] as f64;
            }
        }
        for u in 0..n {
            if !pinned[u] {
                s[col_of_node[u]] = deg[u] as f64;
            }
        }
        s
    };

    let mut theta = DVector::<f64>::zeros(dim);
    // Start from the ER fit: class log-odds, zero degree effects.
    for c in 0..nc {
        if cap[c] > 0 {
            theta[col_of_class[c]] = logit(t[c] as f64 / cap[c] as f64);
        }
    }

    let eta = |theta: &DVector<f64>, u: usize, v: usize, c: usize| -> f64 {
        let mut e = theta[col_of_class[c]];
        if !pinned[u] {
            e += theta[col_of_node[u]];
        }
        if !pinned[v] {
            e += theta[col_of_node[v]];
        }
        e
    };
    let objective = |theta: &DVector<f64>| -> f64 {
        // log L = theta . T - sum log(1 + e^eta)
        let mut ll = theta.dot(&observed);
        for &(u, v, c) in &dyads {
            let e = eta(theta, u, v, c);
            ll -= if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
        }
        ll
    };

    let mut iterations = 0;
    let mut residual;
    loop {
        // Gradient and Fisher information.
        let mut grad = observed.clone();
        let mut info = DMatrix::<f64>::zeros(dim, dim);
        for &(u, v, c) in &dyads {
            let p = logistic(eta(&theta, u, v, c));
            let w = p * (1.0 - p);
            let mut cols = [col_of_class[c], usize::MAX, usize::MAX];
            if !pinned[u] {
                cols[1] = col_of_node[u];
            }
            if !pinned[v] {
                cols[2] = col_of_node[v];
            }
            for &a in cols.iter().filter(|&&a| a != usize::MAX) {
                grad[a] -= p;
                for &b in cols.iter().filter(|&&b| b != usize::MAX) {
                    info[(a, b)] += w;
                }
            }
        }
        residual = grad.amax();

        let step = match info.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            // Coordinate-wise fixed-point step when the information is singular.
            None => DVector::from_iterator(
                dim,
                (0..dim).map(|a| if info[(a, a)] > 1e-300 { grad[a] / info[(a, a)] } else { 0.0 }),
            ),
        };

        if residual < opts.tol && step.amax() < opts.tol.sqrt() {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::MleNonexistence(format!(
                "no convergence after {iterations} iterations (residual {residual:.3e})"
            )));
        }
        iterations += 1;

        let base = objective(&theta);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &theta + &step * scale;
            if objective(&cand) >= base - 1e-12 * base.abs().max(1.0) {
                theta = cand;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::MleNonexistence(format!("line search stalled (residual {residual:.3e})")));
        }
        if theta.amax() > opts.divergence_cap {
            return Err(Error::MleNonexistence(format!(
                "parameters exceed {} in magnitude (residual {residual:.3e})",
                opts.divergence_cap
            )));
        }
    }

    // Unpack, then centre beta within each block.
    let mut alpha = vec![vec![0.0; k]; k];
    for c in 0..nc {
        if cap[c] > 0 {
            let (i, j) = z.class_pair(c);
            alpha[i][j] = theta[col_of_class[c]];
            alpha[j][i] = alpha[i][j];
        }
    }
    let mut beta: Vec<f64> = (0..n).map(|u| if pinned[u] { 0.0 } else { theta[col_of_node[u]] }).collect();
    let mut shift = vec![0.0; k];
    for b in 0..k {
        let members: Vec<usize> = z.members(b).collect();
        shift[b] = members.iter().map(|&u| beta[u]).sum::<f64>() / members.len() as f64;
        for &u in &members {
            beta[u] -= shift[b];
        }
    }
    for i in 0..k {
        for j in 0..k {
            if cap[z.class_index(i, j)] > 0 {
                alpha[i][j] += shift[i] + shift[j];
            }
        }
    }

    Ok(BetaFit { params: BetaParams { alpha, beta }, iterations, residual })
}

/// Expected sufficient statistics (block-pair counts then degrees) under a β-SBM.
pub fn beta_expected_stats(z: &BlockAssignment, params: &BetaParams) -> Vec<f64> {
    let n = z.n();
    let mut out = vec![0.0; z.num_classes() + n];
    let g = Graph::empty(n);
    for d in g.dyads() {
        let p = logistic(params.alpha[z.block(d.u())][z.block(d.v())] + params.beta[d.u()] + params.beta[d.v()]);
        out[z.dyad_class(d)] += p;
        out[z.num_classes() + d.u()] += p;
        out[z.num_classes() + d.v()] += p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::t_beta;

    fn fig1() -> (Graph, BlockAssignment) {
        let g = Graph::from_edges_1based(6, [(2, 5), (3, 6), (1, 5), (1, 3), (2, 4), (3, 4), (5, 6)])
            .unwrap();
        let z = BlockAssignment::from_blocks(6, &[&[1, 2], &[3, 4, 5], &[6]]).unwrap();
        (g, z)
    }

    #[test]
    fn edge_prob_cases() {
        let z = BlockAssignment::from_blocks(4, &[&[1, 2], &[3, 4]]).unwrap();
        let beta = ModelParams::Beta(BetaParams { alpha: vec![vec![0.0; 2]; 2], beta: vec![0.0; 4] });
        let add = ModelParams::Add(AddParams { alpha: vec![0.0, 0.0] });
        let er = ModelParams::Er(ErParams::new(vec![vec![0.6, 0.1], vec![0.1, 0.6]]).unwrap());
        for (u, v) in [(0, 1), (0, 2), (1, 3)] {
            assert_eq!(beta.edge_prob(&z, u, v).unwrap(), 0.5);
            assert_eq!(add.edge_prob(&z, u, v).unwrap(), 0.5);
        }
        assert_eq!(er.edge_prob(&z, 0, 2).unwrap(), 0.1);
        assert_eq!(er.edge_prob(&z, 2, 3).unwrap(), 0.6);
        assert!(matches!(er.edge_prob(&z, 1, 1), Err(Error::SelfLoop(1))));
    }

    #[test]
    fn er_mle_figure() {
        let (g, z) = fig1();
        let p = mle_er(&g, &z).unwrap();
        assert_eq!(p.q[0][1], 4.0 / 6.0);
        assert_eq!(p.q[1][1], 1.0 / 3.0);
        assert_eq!(p.q[0][2], 0.0);
        assert_eq!(p.q[1][2], 2.0 / 3.0);
        assert_eq!(p.q[0][0], 0.0);
        assert_eq!(p.undefined_diagonal, vec![2]);
        assert!(matches!(mle_er_entry(&g, &z, 2, 2), Err(Error::SingletonBlock(3))));
        assert_eq!(mle_er_entry(&g, &z, 1, 0).unwrap(), 4.0 / 6.0);
    }

    #[test]
    fn er_mle_extremes() {
        let z = BlockAssignment::from_blocks(5, &[&[1, 2], &[3, 4, 5]]).unwrap();
        let full = mle_er(&Graph::complete(5), &z).unwrap();
        assert!(full.q.iter().flatten().all(|&x| x == 1.0));
        let none = mle_er(&Graph::empty(5), &z).unwrap();
        assert!(none.q.iter().flatten().all(|&x| x == 0.0));
        let gap = BlockAssignment::new(3, vec![0, 0, 2, 2, 2]).unwrap();
        assert!(matches!(mle_er(&Graph::empty(5), &gap), Err(Error::EmptyBlock(2))));
    }

    #[test]
    fn er_mle_moment_match() {
        let (g, z) = fig1();
        let p = mle_er(&g, &z).unwrap();
        let t = t_er(&g, &z).unwrap().values;
        let cap = z.class_capacity();
        for c in 0..z.num_classes() {
            let (i, j) = z.class_pair(c);
            // Exact in binary floating point for these small rationals.
            assert_eq!((p.q[i][j] * cap[c] as f64).round(), t[c] as f64);
        }
    }

    #[test]
    fn add_estimator() {
        let (g, z) = fig1();
        let q = mle_add(&g, &z).unwrap();
        assert_eq!(q[0][1], 4.0 / 15.0);
        assert!(mle_add(&Graph::empty(6), &z).unwrap().iter().flatten().all(|&x| x == 0.0));
        let one = Graph::from_edges_1based(4, [(1, 2)]).unwrap();
        let z2 = BlockAssignment::from_blocks(4, &[&[1], &[2, 3, 4]]).unwrap();
        assert_eq!(mle_add(&one, &z2).unwrap()[0][1], 1.0 / 6.0);
        assert!(mle_add(&Graph::empty(1), &BlockAssignment::single(1)).is_err());
    }

    #[test]
    fn loglik_cases() {
        let z = BlockAssignment::from_blocks(5, &[&[1, 2], &[3, 4, 5]]).unwrap();
        let g = Graph::from_edges_1based(5, [(1, 2), (2, 3)]).unwrap();
        let half = ModelParams::Er(ErParams::new(vec![vec![0.5; 2]; 2]).unwrap());
        let ll = loglik(&g, &z, &half).unwrap();
        assert!((ll + 10.0 * 2f64.ln()).abs() < 1e-12);

        let exact = DyadProbs { n: 5, p: g.dyads().map(|d| if g.has_edge(d) { 1.0 } else { 0.0 }).collect() };
        assert_eq!(loglik_probs(&g, &exact).unwrap(), 0.0);

        let zero = ModelParams::Er(ErParams::new(vec![vec![0.0; 2]; 2]).unwrap());
        assert_eq!(loglik(&g, &z, &zero).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn loglik_figure_brute_force() {
        let (g, z) = fig1();
        let p = ModelParams::Er(mle_er(&g, &z).unwrap());
        let mut brute = 0.0;
        for u in 0..6 {
            for v in (u + 1)..6 {
                let q = p.edge_prob(&z, u, v).unwrap();
                if g.adjacent(u, v) {
                    brute += q.ln();
                } else if q < 1.0 {
                    brute += (1.0 - q).ln();
                }
            }
        }
        assert!((loglik(&g, &z, &p).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn beta_fit_complete_graph_diverges() {
        let z = BlockAssignment::from_blocks(6, &[&[1, 2, 3], &[4, 5, 6]]).unwrap();
        assert!(matches!(
            mle_beta(&Graph::complete(6), &z, 1e-8, 200),
            Err(Error::MleNonexistence(_))
        ));
    }

    #[test]
    fn beta_fit_moment_matching() {
        // A 2-block graph on 8 nodes with interior statistics.
        let g = Graph::from_edges_1based(
            8,
            [(1, 2), (1, 3), (2, 4), (3, 4), (1, 5), (2, 6), (4, 7), (5, 6), (6, 7), (7, 8), (5, 8), (3, 8), (2, 3), (6, 8)],
        )
        .unwrap();
        let z = BlockAssignment::from_blocks(8, &[&[1, 2, 3, 4], &[5, 6, 7, 8]]).unwrap();
        let fit = mle_beta_with(&g, &z, &BetaFitOptions::default()).unwrap();
        let expected = beta_expected_stats(&z, &fit.params);
        let observed = t_beta(&g, &z).unwrap().values;
        for (e, o) in expected.iter().zip(&observed) {
            assert!((e - *o as f64).abs() < 1e-6, "{e} vs {o}");
        }
        for b in 0..2 {
            let s: f64 = z.members(b).map(|u| fit.params.beta[u]).sum();
            assert!(s.abs() < 1e-9);
        }
    }
}
