//! Exact goodness-of-fit tests with known and latent block assignments.
//!
//! For a known assignment the observed statistic is compared with its
//! distribution over fiber draws. For a latent assignment the same is done
//! for every atom of an estimated assignment distribution and the fiber
//! p-values are averaged with the atom weights.
//!
//! Seeds fan out deterministically: one `u64` is drawn from the caller's RNG
//! per fiber, in atom order, and seeds that fiber's chain. A single-atom
//! distribution therefore reproduces the known-assignment test exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{
    gibbs_posterior, spectral_estimate, AssignmentDistribution, GibbsOptions, Provenance, SpectralOptions,
};
use crate::error::{Error, Result};
use crate::gof::{chi2_bc, chi2_pearson, GofKind};
use crate::graph::{BlockAssignment, Graph, Model};
use crate::models::{mle_add, mle_beta_with, mle_er, BetaFitOptions, ErParams, ModelParams};
use crate::polytope::{mle_exists, Verdict};
use crate::sampler::{walk_with, ChainSettings, WalkDiagnostics};

/// Relative tolerance of the `GoF(g') >= GoF(g_obs)` comparison.
pub const COMPARISON_RTOL: f64 = 1e-12;

pub fn default_gof(model: Model) -> GofKind {
    match model {
        Model::Er | Model::Add => GofKind::ChiSqBC,
        Model::Beta => GofKind::ChiSqPearson,
    }
}

/// A statistic choice for a model, with a warning when the pairing is degenerate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GofChoice {
    pub kind: GofKind,
    pub warning: Option<String>,
}

/// Resolves a statistic tag (`None` takes the model default).
pub fn gof_dispatch(model: Model, tag: Option<&str>) -> Result<GofChoice> {
    let kind = match tag {
        Some(t) => t.parse()?,
        None => default_gof(model),
    };
    let warning = (model == Model::Er && kind == GofKind::ChiSqPearson).then(|| {
        "Pearson chi-square with ER fitted values is constant on every ER fiber; the test is uninformative"
            .to_string()
    });
    Ok(GofChoice { kind, warning })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestSettings {
    pub chain: ChainSettings,
    /// Re-fit the model under each sampled assignment. When false, parameters
    /// are fitted once under the heaviest assignment and reused, label by
    /// label, for every fiber.
    pub refit_per_fiber: bool,
    /// Report `(count + 1) / (N + 1)` instead of `count / N`.
    pub plus_one: bool,
    /// Treat an ER or additive statistic on the polytope boundary as MLE
    /// nonexistence. Off by default: the closed-form estimators stay defined
    /// on the boundary and the conditional test remains valid.
    pub require_interior: bool,
    /// Keep every sampled statistic in the report.
    pub keep_samples: bool,
}

impl Default for TestSettings {
    fn default() -> Self {
        TestSettings {
            chain: ChainSettings::default(),
            refit_per_fiber: true,
            plus_one: false,
            require_interior: false,
            keep_samples: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FiberStatus {
    Ok,
    /// The walk never moved; the fiber may be a single graph.
    Degenerate,
    /// The MLE does not exist for this assignment; `p = 1` by convention.
    Nonexistent { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberRecord {
    pub fiber_id: usize,
    /// 1-based block labels.
    pub assignment: Vec<usize>,
    pub weight: f64,
    pub observed: Option<f64>,
    pub p_value: f64,
    /// Draws with `GoF(g') >= GoF(g_obs)`.
    pub exceed_count: usize,
    /// Draws where the statistic was infinite (zero expected, positive observed count).
    pub infinite_samples: usize,
    #[serde(flatten)]
    pub status: FiberStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polytope: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<WalkDiagnostics>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub model: Model,
    pub gof: GofKind,
    pub latent: bool,
    pub p_value: f64,
    pub fibers: Vec<FiberRecord>,
    pub settings: TestSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Fitted values in a form that can be re-read under any assignment.
#[derive(Debug, Clone)]
enum Fit {
    /// Block-pair probability matrix.
    Matrix(Vec<Vec<f64>>),
    Params(ModelParams),
}

enum Evaluator {
    Bc { z: BlockAssignment, qhat: Vec<Vec<f64>> },
    Pearson(crate::models::DyadProbs),
}

impl Evaluator {
    fn build(fit: &Fit, kind: GofKind, z: &BlockAssignment) -> Result<Evaluator> {
        match (kind, fit) {
            (GofKind::ChiSqBC, Fit::Matrix(q)) => Ok(Evaluator::Bc { z: z.clone(), qhat: q.clone() }),
            (GofKind::ChiSqBC, Fit::Params(_)) => {
                Err(Error::Unsupported("block-corrected statistic needs a probability matrix".into()))
            }
            (GofKind::ChiSqPearson, Fit::Matrix(q)) => {
                let params = ModelParams::Er(ErParams { q: q.clone(), undefined_diagonal: Vec::new() });
                Ok(Evaluator::Pearson(params.dyad_probs(z)?))
            }
            (GofKind::ChiSqPearson, Fit::Params(p)) => Ok(Evaluator::Pearson(p.dyad_probs(z)?)),
        }
    }

    /// `+∞` when an expected count is zero but the observed count is not.
    fn eval(&self, g: &Graph) -> Result<f64> {
        let r = match self {
            Evaluator::Bc { z, qhat } => chi2_bc(g, z, qhat),
            Evaluator::Pearson(p) => chi2_pearson(g, p),
        };
        match r {
            Ok(v) => Ok(v.value),
            Err(Error::ZeroExpected { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

/// `Err(Ok(reason))` marks MLE nonexistence; `Err(Err(e))` is a hard error.
fn fit(
    model: Model,
    kind: GofKind,
    g: &Graph,
    z: &BlockAssignment,
    require_interior: bool,
) -> std::result::Result<(Fit, Option<Verdict>), std::result::Result<String, Error>> {
    let nonexistence = |e: Error| match e {
        Error::MleNonexistence(r) => Ok(r),
        Error::EmptyBlock(b) => Ok(format!("block {b} is empty")),
        other => Err(other),
    };
    z.check_graph(g).map_err(Err)?;
    z.require_nonempty().map_err(nonexistence)?;
    let verdict = match model {
        Model::Er | Model::Add => {
            let v = match mle_exists(model, g, z) {
                Ok((_, v)) => Some(v.verdict),
                // Too many blocks for the additive inequality list.
                Err(Error::Unsupported(_)) => None,
                Err(e) => return Err(Err(e)),
            };
            if require_interior && v.is_some_and(|v| v != Verdict::Interior) {
                return Err(Ok("sufficient statistic is not interior to the model polytope".into()));
            }
            v
        }
        Model::Beta => None,
    };
    let fit = match (model, kind) {
        (Model::Er, _) | (Model::Beta, GofKind::ChiSqBC) => Fit::Matrix(mle_er(g, z).map_err(nonexistence)?.q),
        (Model::Add, _) => Fit::Matrix(mle_add(g, z).map_err(nonexistence)?),
        (Model::Beta, GofKind::ChiSqPearson) => {
            let f = mle_beta_with(g, z, &BetaFitOptions::default()).map_err(nonexistence)?;
            Fit::Params(ModelParams::Beta(f.params))
        }
    };
    Ok((fit, verdict))
}

fn exceeds(sample: f64, observed: f64) -> bool {
    if observed.is_infinite() {
        return sample.is_infinite();
    }
    sample >= observed - COMPARISON_RTOL * observed.abs()
}

struct FiberJob<'a> {
    fiber_id: usize,
    z: &'a BlockAssignment,
    weight: f64,
    seed: u64,
    /// Parameters fitted once, for the literal single-fit reading.
    shared: Option<&'a std::result::Result<(Fit, Option<Verdict>), String>>,
}

fn run_fiber(
    g_obs: &Graph,
    model: Model,
    kind: GofKind,
    settings: &TestSettings,
    job: FiberJob<'_>,
) -> Result<FiberRecord> {
    let mut record = FiberRecord {
        fiber_id: job.fiber_id,
        assignment: job.z.to_1based(),
        weight: job.weight,
        observed: None,
        p_value: 1.0,
        exceed_count: 0,
        infinite_samples: 0,
        status: FiberStatus::Ok,
        polytope: None,
        diagnostics: None,
        samples: Vec::new(),
    };
    let fitted = match job.shared {
        Some(Ok((f, _))) => {
            let v = match model {
                Model::Beta => None,
                _ => mle_exists(model, g_obs, job.z).ok().map(|(_, v)| v.verdict),
            };
            Ok((f.clone(), v))
        }
        Some(Err(reason)) => Err(Ok(reason.clone())),
        None => fit(model, kind, g_obs, job.z, settings.require_interior),
    };
    let (fit, verdict) = match fitted {
        Ok(x) => x,
        Err(Ok(reason)) => {
            record.status = FiberStatus::Nonexistent { reason };
            return Ok(record);
        }
        Err(Err(e)) => return Err(e),
    };
    record.polytope = verdict;

    let evaluator = Evaluator::build(&fit, kind, job.z)?;
    let observed = evaluator.eval(g_obs)?;
    record.observed = Some(observed);

    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let mut values = Vec::with_capacity(settings.chain.num_graphs);
    let mut eval_error = None;
    let diag = walk_with(
        g_obs,
        job.z,
        model,
        &settings.chain,
        &mut rng,
        |g| match evaluator.eval(g) {
            Ok(v) => values.push(v),
            Err(e) => {
                eval_error.get_or_insert(e);
            }
        },
        |_| {},
    )?;
    if let Some(e) = eval_error {
        return Err(e);
    }
    if let Some(d) = &diag.drift {
        return Err(Error::Estimator(format!("sufficient statistic drifted during the walk: {d}")));
    }

    let count = values.iter().filter(|&&v| exceeds(v, observed)).count();
    let n = values.len();
    record.exceed_count = count;
    record.infinite_samples = values.iter().filter(|v| v.is_infinite()).count();
    record.p_value = if settings.plus_one {
        (count + 1) as f64 / (n + 1) as f64
    } else {
        count as f64 / n as f64
    };
    if diag.is_stuck() {
        record.status = FiberStatus::Degenerate;
        record.p_value = 1.0;
    }
    record.diagnostics = Some(diag);
    if settings.keep_samples {
        record.samples = values;
    }
    Ok(record)
}

/// Test with a known block assignment. Fails with `MleNonexistence` when the
/// model cannot be fitted to `g_obs`.
pub fn test_known<R: Rng + ?Sized>(
    g_obs: &Graph,
    z: &BlockAssignment,
    model: Model,
    gof: GofKind,
    settings: &TestSettings,
    rng: &mut R,
) -> Result<TestReport> {
    z.check_graph(g_obs)?;
    let seed = rng.next_u64();
    let job = FiberJob { fiber_id: 0, z, weight: 1.0, seed, shared: None };
    let record = run_fiber(g_obs, model, gof, settings, job)?;
    if let FiberStatus::Nonexistent { reason } = &record.status {
        return Err(Error::MleNonexistence(reason.clone()));
    }
    let mut warnings = Vec::new();
    push_warnings(&mut warnings, model, gof, std::slice::from_ref(&record));
    Ok(TestReport {
        model,
        gof,
        latent: false,
        p_value: record.p_value,
        fibers: vec![record],
        settings: *settings,
        seed: None,
        warnings,
    })
}

fn push_warnings(warnings: &mut Vec<String>, model: Model, gof: GofKind, records: &[FiberRecord]) {
    if let Some(w) = gof_dispatch(model, Some(&gof.to_string())).ok().and_then(|c| c.warning) {
        warnings.push(w);
    }
    for r in records {
        match &r.status {
            FiberStatus::Degenerate => {
                warnings.push(format!("fiber {}: the walk never moved; p = 1", r.fiber_id))
            }
            FiberStatus::Nonexistent { reason } => {
                warnings.push(format!("fiber {}: MLE does not exist ({reason}); p = 1", r.fiber_id))
            }
            FiberStatus::Ok => {}
        }
        if r.infinite_samples > 0 {
            warnings.push(format!(
                "fiber {}: {} draws had zero expected counts with observed edges; counted as exceeding",
                r.fiber_id, r.infinite_samples
            ));
        }
    }
}

/// Test averaged over a given distribution of block assignments.
pub fn test_with_distribution<R: Rng + ?Sized>(
    g_obs: &Graph,
    dist: &AssignmentDistribution,
    model: Model,
    gof: GofKind,
    settings: &TestSettings,
    rng: &mut R,
) -> Result<TestReport> {
    for a in dist.atoms() {
        a.z.check_graph(g_obs)?;
    }
    let seeds: Vec<u64> = dist.atoms().iter().map(|_| rng.next_u64()).collect();
    let shared = if settings.refit_per_fiber {
        None
    } else {
        match fit(model, gof, g_obs, dist.mode(), settings.require_interior) {
            Ok(x) => Some(Ok(x)),
            Err(Ok(reason)) => Some(Err(reason)),
            Err(Err(e)) => return Err(e),
        }
    };

    let records: Vec<FiberRecord> = dist
        .atoms()
        .par_iter()
        .zip(seeds.par_iter())
        .enumerate()
        .map(|(i, (atom, &seed))| {
            let job = FiberJob { fiber_id: i, z: &atom.z, weight: atom.weight, seed, shared: shared.as_ref() };
            run_fiber(g_obs, model, gof, settings, job)
        })
        .collect::<Result<_>>()?;

    let p_value = records.iter().map(|r| r.weight * r.p_value).sum::<f64>().clamp(0.0, 1.0);
    let mut warnings = Vec::new();
    push_warnings(&mut warnings, model, gof, &records);
    Ok(TestReport {
        model,
        gof,
        latent: dist.provenance == Provenance::Posterior || dist.len() > 1,
        p_value,
        fibers: records,
        settings: *settings,
        seed: None,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Estimator {
    Spectral(SpectralOptions),
    Gibbs {
        #[serde(flatten)]
        options: GibbsOptions,
        /// Atoms at or below this weight are dropped; default `1 / iterations`.
        #[serde(default)]
        truncation: Option<f64>,
        /// Keep at most this many atoms.
        #[serde(default)]
        max_fibers: Option<usize>,
    },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Gibbs { options: GibbsOptions::default(), truncation: None, max_fibers: None }
    }
}

/// Estimates a distribution of block assignments.
pub fn estimate_blocks<R: Rng + ?Sized>(
    g: &Graph,
    k: usize,
    estimator: &Estimator,
    rng: &mut R,
) -> Result<AssignmentDistribution> {
    match estimator {
        Estimator::Spectral(opts) => spectral_estimate(g, k, opts),
        Estimator::Gibbs { options, truncation, max_fibers } => {
            let d = gibbs_posterior(g, k, options, rng)?;
            let threshold = truncation.unwrap_or(1.0 / options.iterations as f64);
            Ok(d.truncated(threshold, *max_fibers))
        }
    }
}

/// Test with a latent block assignment estimated from `g_obs`.
pub fn test_latent<R: Rng + ?Sized>(
    g_obs: &Graph,
    model: Model,
    gof: GofKind,
    k: usize,
    estimator: &Estimator,
    settings: &TestSettings,
    rng: &mut R,
) -> Result<TestReport> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    let dist = estimate_blocks(g_obs, k, estimator, rng)?;
    test_with_distribution(g_obs, &dist, model, gof, settings, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure() -> (Graph, BlockAssignment) {
        let g = Graph::from_edges_1based(6, [(2, 5), (3, 6), (1, 5), (1, 3), (2, 4), (3, 4), (5, 6)])
            .unwrap();
        let z = BlockAssignment::from_blocks(6, &[&[1, 2], &[3, 4, 5], &[6]]).unwrap();
        (g, z)
    }

    fn quick() -> TestSettings {
        TestSettings { chain: ChainSettings::with_num_graphs(200), ..Default::default() }
    }

    #[test]
    fn dispatch() {
        assert_eq!(gof_dispatch(Model::Er, None).unwrap().kind, GofKind::ChiSqBC);
        assert_eq!(gof_dispatch(Model::Add, None).unwrap().kind, GofKind::ChiSqBC);
        assert_eq!(gof_dispatch(Model::Beta, None).unwrap().kind, GofKind::ChiSqPearson);
        assert!(gof_dispatch(Model::Er, Some("pearson")).unwrap().warning.is_some());
        assert!(gof_dispatch(Model::Beta, Some("chi2-bc")).unwrap().warning.is_none());
        assert!(gof_dispatch(Model::Er, Some("g-test")).is_err());
    }

    #[test]
    fn singleton_fiber_has_p_one() {
        let g = Graph::complete(5);
        let z = BlockAssignment::from_blocks(5, &[&[1, 2], &[3, 4, 5]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = test_known(&g, &z, Model::Er, GofKind::ChiSqBC, &quick(), &mut rng).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.fibers[0].status, FiberStatus::Degenerate);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn pearson_under_er_is_always_one() {
        let (g, z) = figure();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = test_known(&g, &z, Model::Er, GofKind::ChiSqPearson, &quick(), &mut rng).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(r.warnings[0].contains("constant"));
    }

    #[test]
    fn p_values_in_range_and_plus_one() {
        let (g, z) = figure();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = test_known(&g, &z, Model::Er, GofKind::ChiSqBC, &quick(), &mut rng).unwrap();
        assert!((0.0..=1.0).contains(&r.p_value));
        let f = &r.fibers[0];
        assert_eq!(f.samples.len(), 200);
        assert_eq!(r.p_value, f.exceed_count as f64 / 200.0);
        let s = TestSettings { plus_one: true, ..quick() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r1 = test_known(&g, &z, Model::Er, GofKind::ChiSqBC, &s, &mut rng).unwrap();
        assert_eq!(r1.p_value, (f.exceed_count + 1) as f64 / 201.0);
    }

    #[test]
    fn beta_nonexistence_is_an_error_when_known() {
        // The figure graph has empty block-pair classes, a trivial face.
        let (g, z) = figure();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = test_known(&g, &z, Model::Beta, GofKind::ChiSqPearson, &quick(), &mut rng);
        assert!(matches!(r, Err(Error::MleNonexistence(_))));
        let strict = TestSettings { require_interior: true, ..quick() };
        let r = test_known(&g, &z, Model::Er, GofKind::ChiSqBC, &strict, &mut rng);
        assert!(matches!(r, Err(Error::MleNonexistence(_))));
    }

    #[test]
    fn nonexistent_fiber_counts_as_one_when_latent() {
        let (g, z) = figure();
        let dist = AssignmentDistribution::point(&z);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = test_with_distribution(&g, &dist, Model::Beta, GofKind::ChiSqPearson, &quick(), &mut rng).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(matches!(r.fibers[0].status, FiberStatus::Nonexistent { .. }));
    }

    #[test]
    fn single_atom_reproduces_known() {
        let (g, z) = figure();
        let dist = AssignmentDistribution::point(&z);
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let known = test_known(&g, &dist.mode().clone(), Model::Add, GofKind::ChiSqBC, &quick(), &mut a).unwrap();
        let latent = test_with_distribution(&g, &dist, Model::Add, GofKind::ChiSqBC, &quick(), &mut b).unwrap();
        assert_eq!(known.p_value, latent.p_value);
        assert_eq!(known.fibers[0].samples, latent.fibers[0].samples);
    }

    #[test]
    fn comparison_tolerance() {
        assert!(exceeds(1.0, 1.0));
        assert!(exceeds(1.0 - 1e-14, 1.0));
        assert!(!exceeds(1.0 - 1e-9, 1.0));
        assert!(exceeds(f64::INFINITY, 3.0));
        assert!(!exceeds(3.0, f64::INFINITY));
        assert!(exceeds(0.0, 0.0));
    }
}
