//! Synthetic block-model data and rejection-rate experiments.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::GofKind;
use crate::graph::{choose2, BlockAssignment, Graph, Model};
use crate::models::{AddParams, BetaParams, ErParams, ModelParams};
use crate::testing::{default_gof, test_latent, Estimator, TestSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Dense,
    Sparse,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Regime> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(Regime::Dense),
            "sparse" => Ok(Regime::Sparse),
            other => Err(Error::Parse(format!("unknown regime `{other}`"))),
        }
    }
}

/// Generating model and parameters. Named regimes resolve to the two-block
/// reference parameters; overrides replace them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: Model,
    pub n: usize,
    #[serde(default = "two")]
    pub k: usize,
    #[serde(default = "dense")]
    pub regime: Regime,
    /// Block-pair probabilities (ER and additive data).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    /// Additive block parameters; edges have log-odds `α_i + α_j`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_vector: Option<Vec<f64>>,
    /// β-model block-pair log-odds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_matrix: Option<Vec<Vec<f64>>>,
    /// `β_u ~ Unif(lo, hi)`; default `(−n, n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_bounds: Option<(f64, f64)>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
}

fn two() -> usize {
    2
}
fn one() -> usize {
    1
}
fn dense() -> Regime {
    Regime::Dense
}

/// Generating parameters that do not depend on the node draw.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Matrix(Vec<Vec<f64>>),
    Additive(Vec<f64>),
    Beta { alpha: Vec<Vec<f64>>, bounds: (f64, f64) },
}

pub fn reference_q(model: Model, regime: Regime) -> Option<Vec<Vec<f64>>> {
    match (model, regime) {
        (Model::Er, Regime::Dense) => Some(vec![vec![0.6, 0.1], vec![0.1, 0.6]]),
        (Model::Er, Regime::Sparse) => Some(vec![vec![0.2, 0.01], vec![0.01, 0.2]]),
        (Model::Add, Regime::Dense) => Some(vec![vec![0.77, 0.67], vec![0.67, 0.55]]),
        (Model::Add, Regime::Sparse) => Some(vec![vec![0.02, 0.12], vec![0.12, 0.50]]),
        (Model::Beta, _) => None,
    }
}

pub fn reference_beta_alpha(regime: Regime) -> Vec<Vec<f64>> {
    match regime {
        Regime::Dense => vec![vec![0.6, 0.1], vec![0.1, 0.3]],
        Regime::Sparse => vec![vec![-2.0, -0.01], vec![-0.01, -1.0]],
    }
}

impl SimulationConfig {
    pub fn new(model: Model, n: usize, regime: Regime) -> SimulationConfig {
        SimulationConfig {
            model,
            n,
            k: 2,
            regime,
            q: None,
            alpha_vector: None,
            alpha_matrix: None,
            beta_bounds: None,
            seed: 0,
            replicates: 1,
        }
    }

    pub fn generator(&self) -> Result<Generator> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::InvalidParams("n and k must be positive".into()));
        }
        if self.n > crate::io::MAX_NODES || self.k > self.n {
            return Err(Error::InvalidParams(format!(
                "need k <= n <= {}; got n = {}, k = {}",
                crate::io::MAX_NODES,
                self.n,
                self.k
            )));
        }
        let missing = || {
            Error::InvalidParams(format!(
                "no reference parameters for k = {}; give them explicitly",
                self.k
            ))
        };
        let gen = match self.model {
            Model::Er | Model::Add => {
                if let (Model::Add, Some(a)) = (self.model, &self.alpha_vector) {
                    Generator::Additive(a.clone())
                } else {
                    let q = match &self.q {
                        Some(q) => q.clone(),
                        None if self.k == 2 => reference_q(self.model, self.regime).unwrap(),
                        None => return Err(missing()),
                    };
                    Generator::Matrix(q)
                }
            }
            Model::Beta => {
                let alpha = match &self.alpha_matrix {
                    Some(a) => a.clone(),
                    None if self.k == 2 => reference_beta_alpha(self.regime),
                    None => return Err(missing()),
                };
                let n = self.n as f64;
                let bounds = self.beta_bounds.unwrap_or((-n, n));
                if !(bounds.0.is_finite() && bounds.1.is_finite() && bounds.0 <= bounds.1) {
                    return Err(Error::InvalidParams("β bounds must be finite with lo <= hi".into()));
                }
                Generator::Beta { alpha, bounds }
            }
        };
        let k = match &gen {
            Generator::Matrix(q) => {
                ErParams::new(q.clone())?;
                q.len()
            }
            Generator::Additive(a) => {
                AddParams { alpha: a.clone() }.validate()?;
                a.len()
            }
            Generator::Beta { alpha, .. } => {
                BetaParams { alpha: alpha.clone(), beta: Vec::new() }.validate()?;
                alpha.len()
            }
        };
        if k != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, found: k });
        }
        Ok(gen)
    }
}

/// Each node's block drawn independently and uniformly. Blocks may be empty,
/// which is likely when `k` is close to `n`.
pub fn simulate_assignment<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<BlockAssignment> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    BlockAssignment::new(k, (0..n).map(|_| rng.gen_range(0..k)).collect())
}

/// Every dyad present independently with its model probability.
pub fn simulate_graph<R: Rng + ?Sized>(z: &BlockAssignment, params: &ModelParams, rng: &mut R) -> Result<Graph> {
    let probs = params.dyad_probs(z)?;
    let mut g = Graph::empty(z.n());
    let dyads: Vec<_> = g.dyads().collect();
    for (d, &p) in dyads.into_iter().zip(&probs.p) {
        if rng.gen::<f64>() < p {
            g.set_edge(d, true);
        }
    }
    Ok(g)
}

/// Draws model parameters for one replicate (β-model node effects are
/// redrawn each time).
pub fn draw_params<R: Rng + ?Sized>(gen: &Generator, n: usize, rng: &mut R) -> ModelParams {
    match gen {
        Generator::Matrix(q) => ModelParams::Er(ErParams { q: q.clone(), undefined_diagonal: Vec::new() }),
        Generator::Additive(a) => ModelParams::Add(AddParams { alpha: a.clone() }),
        Generator::Beta { alpha, bounds } => {
            let beta = (0..n)
                .map(|_| if bounds.0 < bounds.1 { rng.gen_range(bounds.0..bounds.1) } else { bounds.0 })
                .collect();
            ModelParams::Beta(BetaParams { alpha: alpha.clone(), beta })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub z: BlockAssignment,
    pub params: ModelParams,
    pub graph: Graph,
}

pub fn simulate<R: Rng + ?Sized>(config: &SimulationConfig, rng: &mut R) -> Result<Replicate> {
    let gen = config.generator()?;
    let z = simulate_assignment(config.n, config.k, rng)?;
    let params = draw_params(&gen, config.n, rng);
    let graph = simulate_graph(&z, &params, rng)?;
    Ok(Replicate { z, params, graph })
}

/// Per-replicate seeds derived from a master seed.
pub fn replicate_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// One cell of a rejection-rate table: data from `simulation`, tested
/// against `null_model` with `k_test` latent blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub simulation: SimulationConfig,
    #[serde(default = "er")]
    pub null_model: Model,
    #[serde(default)]
    pub gof: Option<GofKind>,
    #[serde(default)]
    pub k_test: Option<usize>,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default = "quiet_settings")]
    pub test: TestSettings,
    #[serde(default = "nominal")]
    pub level: f64,
}

fn er() -> Model {
    Model::Er
}
fn nominal() -> f64 {
    0.05
}
fn quiet_settings() -> TestSettings {
    TestSettings { keep_samples: false, ..Default::default() }
}

impl ExperimentConfig {
    pub fn new(simulation: SimulationConfig) -> ExperimentConfig {
        ExperimentConfig {
            simulation,
            null_model: Model::Er,
            gof: None,
            k_test: None,
            estimator: Estimator::default(),
            test: quiet_settings(),
            level: nominal(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub density: f64,
    pub p_value: Option<f64>,
    pub fibers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub data_model: Model,
    pub null_model: Model,
    pub n: usize,
    pub regime: Regime,
    pub level: f64,
    pub rejection_rate: f64,
    pub rejections: usize,
    pub completed: usize,
    pub failures: usize,
    pub mean_density: f64,
    pub replicates: Vec<ReplicateOutcome>,
}

fn run_replicate(config: &ExperimentConfig, index: usize, seed: u64) -> ReplicateOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcome = ReplicateOutcome { replicate: index, seed, density: 0.0, p_value: None, fibers: 0, error: None };
    let rep = match simulate(&config.simulation, &mut rng) {
        Ok(r) => r,
        Err(e) => {
            outcome.error = Some(e.to_string());
            return outcome;
        }
    };
    let nd = choose2(rep.graph.n());
    outcome.density = if nd > 0 { rep.graph.edge_count() as f64 / nd as f64 } else { 0.0 };
    let gof = config.gof.unwrap_or_else(|| default_gof(config.null_model));
    let k = config.k_test.unwrap_or(config.simulation.k);
    match test_latent(&rep.graph, config.null_model, gof, k, &config.estimator, &config.test, &mut rng) {
        Ok(report) => {
            outcome.p_value = Some(report.p_value);
            outcome.fibers = report.fibers.len();
        }
        Err(e) => outcome.error = Some(e.to_string()),
    }
    outcome
}

/// Simulates every replicate and runs the latent test on each. Failed
/// replicates are counted, not fatal.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentCell> {
    config.simulation.generator()?;
    if !(0.0..=1.0).contains(&config.level) {
        return Err(Error::InvalidParams(format!("level {} is not a probability", config.level)));
    }
    let seeds = replicate_seeds(config.simulation.seed, config.simulation.replicates);
    let replicates: Vec<ReplicateOutcome> =
        seeds.par_iter().enumerate().map(|(i, &s)| run_replicate(config, i, s)).collect();

    let completed = replicates.iter().filter(|r| r.p_value.is_some()).count();
    let rejections = replicates.iter().filter(|r| r.p_value.is_some_and(|p| p < config.level)).count();
    let mean_density = if replicates.is_empty() {
        0.0
    } else {
        replicates.iter().map(|r| r.density).sum::<f64>() / replicates.len() as f64
    };
    Ok(ExperimentCell {
        data_model: config.simulation.model,
        null_model: config.null_model,
        n: config.simulation.n,
        regime: config.simulation.regime,
        level: config.level,
        rejection_rate: if completed > 0 { rejections as f64 / completed as f64 } else { f64::NAN },
        rejections,
        completed,
        failures: replicates.len() - completed,
        mean_density,
        replicates,
    })
}
