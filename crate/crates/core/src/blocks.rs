//! Estimating the latent block assignment.
//!
//! Two estimators feed the latent-assignment test: regularized spectral
//! clustering (a point estimate) and a collapsed Gibbs sampler for the ER
//! block model (a posterior). Both return an [`AssignmentDistribution`] whose
//! atoms are canonically labelled, so label-switched copies of a partition
//! merge into one atom.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{choose2, BlockAssignment, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Point,
    Posterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAssignment {
    pub z: BlockAssignment,
    pub weight: f64,
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    z: Vec<usize>,
    weight: f64,
}

/// A finite distribution over canonically labelled block assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentDistribution {
    pub provenance: Provenance,
    atoms: Vec<WeightedAssignment>,
}

impl AssignmentDistribution {
    pub fn point(z: &BlockAssignment) -> AssignmentDistribution {
        AssignmentDistribution {
            provenance: Provenance::Point,
            atoms: vec![WeightedAssignment { z: z.canonical(), weight: 1.0 }],
        }
    }

    /// Merges equal partitions, normalizes, and orders atoms by decreasing
    /// weight, then by canonical labels.
    pub fn from_weighted<I>(provenance: Provenance, items: I) -> Result<AssignmentDistribution>
    where
        I: IntoIterator<Item = (BlockAssignment, f64)>,
    {
        let mut merged: HashMap<BlockAssignment, f64> = HashMap::new();
        for (z, w) in items {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParams(format!("assignment weight {w} is not a nonnegative number")));
            }
            if w > 0.0 {
                *merged.entry(z.canonical()).or_insert(0.0) += w;
            }
        }
        let total: f64 = merged.values().sum();
        if merged.is_empty() || total <= 0.0 {
            return Err(Error::Estimator("assignment distribution has no mass".into()));
        }
        let mut atoms: Vec<WeightedAssignment> =
            merged.into_iter().map(|(z, w)| WeightedAssignment { z, weight: w / total }).collect();
        atoms.sort_by(|a, b| {
            b.weight.total_cmp(&a.weight).then_with(|| a.z.labels().cmp(b.z.labels()))
        });
        Ok(AssignmentDistribution { provenance, atoms })
    }

    /// Empirical distribution of a list of draws.
    pub fn from_draws(provenance: Provenance, draws: &[BlockAssignment]) -> Result<AssignmentDistribution> {
        Self::from_weighted(provenance, draws.iter().map(|z| (z.clone(), 1.0)))
    }

    pub fn atoms(&self) -> &[WeightedAssignment] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mode(&self) -> &BlockAssignment {
        &self.atoms[0].z
    }

    pub fn weight_of(&self, z: &BlockAssignment) -> f64 {
        let c = z.canonical();
        self.atoms.iter().find(|a| a.z == c).map_or(0.0, |a| a.weight)
    }

    /// Drops atoms with weight at or below `threshold` and renormalizes; the
    /// mode always survives. `max_atoms` then keeps only the heaviest atoms.
    pub fn truncated(&self, threshold: f64, max_atoms: Option<usize>) -> AssignmentDistribution {
        let cut = threshold * (1.0 + 1e-9);
        let mut kept: Vec<WeightedAssignment> = self
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, a)| *i == 0 || a.weight > cut)
            .map(|(_, a)| a.clone())
            .collect();
        if let Some(m) = max_atoms {
            kept.truncate(m.max(1));
        }
        let total: f64 = kept.iter().map(|a| a.weight).sum();
        for a in &mut kept {
            a.weight /= total;
        }
        AssignmentDistribution { provenance: self.provenance, atoms: kept }
    }

    /// Total variation distance to another distribution over partitions.
    pub fn total_variation(&self, other: &AssignmentDistribution) -> f64 {
        let mut diff: HashMap<&BlockAssignment, f64> = HashMap::new();
        for a in &self.atoms {
            *diff.entry(&a.z).or_insert(0.0) += a.weight;
        }
        for a in &other.atoms {
            *diff.entry(&a.z).or_insert(0.0) -= a.weight;
        }
        0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
    }
}

impl Serialize for AssignmentDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let reprs: Vec<AtomRepr> =
            self.atoms.iter().map(|a| AtomRepr { z: a.z.to_1based(), weight: a.weight }).collect();
        reprs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AssignmentDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let reprs = Vec::<AtomRepr>::deserialize(d)?;
        let k = reprs.iter().flat_map(|r| r.z.iter().copied()).max().unwrap_or(1);
        let n = reprs.first().map_or(0, |r| r.z.len());
        let mut items = Vec::with_capacity(reprs.len());
        for r in reprs {
            if r.z.len() != n {
                return Err(D::Error::custom("assignments differ in length"));
            }
            let z = BlockAssignment::from_1based(k, &r.z).map_err(D::Error::custom)?;
            items.push((z, r.weight));
        }
        let provenance = if items.len() == 1 { Provenance::Point } else { Provenance::Posterior };
        AssignmentDistribution::from_weighted(provenance, items).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Regularizer: `τ·d̄/n` is added to every adjacency entry.
    pub tau: f64,
    /// k-means restarts; the lowest within-cluster sum of squares wins.
    pub restarts: usize,
    pub max_lloyd_iter: usize,
    /// Seed for k-means initialization.
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { tau: 0.25, restarts: 20, max_lloyd_iter: 100, seed: 0 }
    }
}

pub fn spectral_estimate(g: &Graph, k: usize, opts: &SpectralOptions) -> Result<AssignmentDistribution> {
    Ok(AssignmentDistribution::point(&spectral_assignment(g, k, opts)?))
}

pub fn spectral_assignment(g: &Graph, k: usize, opts: &SpectralOptions) -> Result<BlockAssignment> {
    let n = g.n();
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Estimator(format!("k = {k} exceeds n = {n}")));
    }
    if k == 1 {
        return Ok(BlockAssignment::single(n));
    }
    if g.edge_count() == 0 {
        return Err(Error::Estimator("graph has no edges; spectral clustering has no signal".into()));
    }
    if !(opts.tau.is_finite() && opts.tau >= 0.0) {
        return Err(Error::InvalidParams(format!("regularizer {} must be nonnegative", opts.tau)));
    }

    let dbar = 2.0 * g.edge_count() as f64 / n as f64;
    let shift = opts.tau * dbar / n as f64;
    let mut a = DMatrix::from_element(n, n, shift);
    for d in g.edges() {
        a[(d.u(), d.v())] += 1.0;
        a[(d.v(), d.u())] += 1.0;
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|u| {
            let s: f64 = a.row(u).sum();
            if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 }
        })
        .collect();
    for u in 0..n {
        for v in 0..n {
            a[(u, v)] *= inv_sqrt[u] * inv_sqrt[v];
        }
    }

    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut points = vec![vec![0.0; k]; n];
    for (c, &col) in order.iter().take(k).enumerate() {
        for u in 0..n {
            points[u][c] = eig.eigenvectors[(u, col)];
        }
    }
    for p in &mut points {
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            p.iter_mut().for_each(|x| *x /= norm);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let labels = kmeans(&points, k, opts.restarts.max(1), opts.max_lloyd_iter, &mut rng);
    Ok(BlockAssignment::new(k, labels)?.canonical())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding, best of `restarts`.
fn kmeans<R: Rng>(points: &[Vec<f64>], k: usize, restarts: usize, max_iter: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts {
        let mut centres: Vec<Vec<f64>> = vec![points[rng.gen_range(0..n)].clone()];
        while centres.len() < k {
            let d2: Vec<f64> = points
                .iter()
                .map(|p| centres.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
                .collect();
            let total: f64 = d2.iter().sum();
            let next = if total > 0.0 {
                let mut r = rng.gen::<f64>() * total;
                let mut pick = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if r < d {
                        pick = i;
                        break;
                    }
                    r -= d;
                }
                pick
            } else {
                rng.gen_range(0..n)
            };
            centres.push(points[next].clone());
        }

        let mut labels = vec![0; n];
        for _ in 0..max_iter {
            let mut changed = false;
            for (i, p) in points.iter().enumerate() {
                let c = (0..k)
                    .min_by(|&a, &b| sq_dist(p, &centres[a]).total_cmp(&sq_dist(p, &centres[b])))
                    .unwrap();
                if labels[i] != c {
                    labels[i] = c;
                    changed = true;
                }
            }
            let dim = points[0].len();
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (i, p) in points.iter().enumerate() {
                counts[labels[i]] += 1;
                sums[labels[i]].iter_mut().zip(p).for_each(|(s, x)| *s += x);
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centres[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                } else {
                    // Re-seat an empty cluster on the point farthest from its centre.
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            sq_dist(&points[a], &centres[labels[a]])
                                .total_cmp(&sq_dist(&points[b], &centres[labels[b]]))
                        })
                        .unwrap();
                    centres[c] = points[far].clone();
                    labels[far] = c;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let cost: f64 = points.iter().zip(&labels).map(|(p, &c)| sq_dist(p, &centres[c])).sum();
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, labels));
        }
    }
    best.unwrap().1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GibbsInit {
    Random,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsOptions {
    /// Post-burn-in sweeps, one draw per sweep.
    pub iterations: usize,
    pub burn_in: usize,
    pub init: GibbsInit,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        GibbsOptions { iterations: 2000, burn_in: 500, init: GibbsInit::Spectral }
    }
}

/// `ln m!` for `m <= max`.
fn log_factorials(max: usize) -> Vec<f64> {
    let mut t = vec![0.0; max + 1];
    for m in 1..=max {
        t[m] = t[m - 1] + (m as f64).ln();
    }
    t
}

/// Log marginal likelihood of `e` edges among `pairs` dyads under a uniform
/// edge probability: `ln B(1 + e, 1 + pairs − e)`.
fn log_beta_marginal(lf: &[f64], e: usize, pairs: usize) -> f64 {
    lf[e] + lf[pairs - e] - lf[pairs + 1]
}

/// Unnormalized log posterior of `z` under the collapsed ER block model.
pub fn log_posterior(g: &Graph, z: &BlockAssignment) -> Result<f64> {
    z.check_graph(g)?;
    let lf = log_factorials(choose2(g.n()) + 1);
    let mut counts = vec![0usize; z.num_classes()];
    for d in g.edges() {
        counts[z.dyad_class(d)] += 1;
    }
    let caps = z.class_capacity();
    let mut lp: f64 = z.sizes().iter().map(|&s| lf[s]).sum();
    for c in 0..z.num_classes() {
        lp += log_beta_marginal(&lf, counts[c], caps[c]);
    }
    Ok(lp)
}

/// Collapsed Gibbs sampler over block assignments for the ER block model.
///
/// Edge probabilities carry independent uniform priors and are integrated
/// out; block proportions carry a symmetric Dirichlet(1) prior, also
/// integrated out. Each sweep resamples every node's block from its full
/// conditional.
pub fn gibbs_posterior<R: Rng + ?Sized>(
    g: &Graph,
    k: usize,
    opts: &GibbsOptions,
    rng: &mut R,
) -> Result<AssignmentDistribution> {
    let draws = gibbs_draws(g, k, opts, rng)?;
    AssignmentDistribution::from_draws(Provenance::Posterior, &draws)
}

pub fn gibbs_draws<R: Rng + ?Sized>(
    g: &Graph,
    k: usize,
    opts: &GibbsOptions,
    rng: &mut R,
) -> Result<Vec<BlockAssignment>> {
    let n = g.n();
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Estimator("graph has no nodes".into()));
    }
    if opts.iterations == 0 {
        return Err(Error::InvalidParams("iterations must be at least 1".into()));
    }
    if k == 1 {
        return Ok(vec![BlockAssignment::single(n); opts.iterations]);
    }

    let mut z: Vec<usize> = match opts.init {
        GibbsInit::Spectral => spectral_assignment(g, k, &SpectralOptions::default())
            .map(|a| a.labels().to_vec())
            .unwrap_or_else(|_| (0..n).map(|_| rng.gen_range(0..k)).collect()),
        GibbsInit::Random => (0..n).map(|_| rng.gen_range(0..k)).collect(),
    };
    let adj: Vec<Vec<usize>> = (0..n).map(|u| g.neighbors(u).collect()).collect();
    let lf = log_factorials(choose2(n) + 1);

    let mut sizes = vec![0usize; k];
    let mut e = vec![vec![0usize; k]; k];
    for &b in &z {
        sizes[b] += 1;
    }
    for d in g.edges() {
        let (a, b) = (z[d.u()], z[d.v()]);
        e[a][b] += 1;
        if a != b {
            e[b][a] += 1;
        }
    }
    let pairs = |sizes: &[usize], a: usize, b: usize| {
        if a == b { choose2(sizes[a]) } else { sizes[a] * sizes[b] }
    };

    let mut nbr = vec![0usize; k];
    let mut logp = vec![0.0; k];
    let mut draws = Vec::with_capacity(opts.iterations);
    for sweep in 0..opts.burn_in + opts.iterations {
        for u in 0..n {
            nbr.iter_mut().for_each(|x| *x = 0);
            for &v in &adj[u] {
                nbr[z[v]] += 1;
            }
            // Take u out.
            let old = z[u];
            for b in 0..k {
                e[old][b] -= nbr[b];
                if b != old {
                    e[b][old] -= nbr[b];
                }
            }
            sizes[old] -= 1;

            for c in 0..k {
                let mut lp = ((sizes[c] + 1) as f64).ln();
                for b in 0..k {
                    let before = pairs(&sizes, c, b);
                    let extra = sizes[b];
                    lp += log_beta_marginal(&lf, e[c][b] + nbr[b], before + extra)
                        - log_beta_marginal(&lf, e[c][b], before);
                }
                logp[c] = lp;
            }
            let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logp.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut r = rng.gen::<f64>() * total;
            let mut new = k - 1;
            for (c, &w) in weights.iter().enumerate() {
                if r < w {
                    new = c;
                    break;
                }
                r -= w;
            }

            z[u] = new;
            sizes[new] += 1;
            for b in 0..k {
                e[new][b] += nbr[b];
                if b != new {
                    e[b][new] += nbr[b];
                }
            }
        }
        if sweep >= opts.burn_in {
            draws.push(BlockAssignment::new(k, z.clone())?.canonical());
        }
    }
    Ok(draws)
}

/// Largest `k^n` accepted by [`exact_posterior`].
pub const EXACT_POSTERIOR_LIMIT: u64 = 1 << 20;

/// The collapsed posterior over partitions by summing over all `k^n`
/// assignments. Test oracle for small graphs.
pub fn exact_posterior(g: &Graph, k: usize) -> Result<AssignmentDistribution> {
    let n = g.n();
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    let total = (k as u64).checked_pow(n as u32).filter(|&t| t <= EXACT_POSTERIOR_LIMIT);
    let Some(total) = total else {
        return Err(Error::TooLarge { dyads: choose2(n), limit: EXACT_POSTERIOR_LIMIT as usize });
    };
    let mut logs = Vec::with_capacity(total as usize);
    let mut labels = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = (c % k as u64) as usize;
            c /= k as u64;
        }
        let z = BlockAssignment::new(k, labels.clone())?;
        let lp = log_posterior(g, &z)?;
        logs.push((z, lp));
    }
    let max = logs.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    AssignmentDistribution::from_weighted(
        Provenance::Posterior,
        logs.into_iter().map(|(z, l)| (z, (l - max).exp())),
    )
}
