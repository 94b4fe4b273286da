//! Random walk on a fiber.
//!
//! Conditioning any of the three exponential families on its sufficient
//! statistic gives the uniform distribution over the 0/1 fiber. Proposals are
//! symmetric (see [`crate::moves`]), so the Metropolis–Hastings acceptance
//! ratio is one: valid proposals are always taken, and an empty proposal is a
//! lazy step that keeps the chain aperiodic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{choose2, BlockAssignment, Graph, Model, SufficientStatistics};
use crate::moves::{propose, Move, WalkState};

/// Steps between from-scratch recomputations of the sufficient statistic.
pub const EXACTNESS_CHECK_INTERVAL: u64 = 10_000;

/// Largest dyad count accepted by [`enumerate_fiber`].
pub const ENUMERATION_LIMIT: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainSettings {
    /// Steps discarded before the first draw; default `10·C(n,2)`.
    pub burn_in: Option<u64>,
    /// Steps between draws; default `C(n,2)`.
    pub thin: Option<u64>,
    pub num_graphs: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings { burn_in: None, thin: None, num_graphs: 1000 }
    }
}

impl ChainSettings {
    pub fn with_num_graphs(num_graphs: usize) -> ChainSettings {
        ChainSettings { num_graphs, ..Default::default() }
    }

    pub fn burn_in_for(&self, n: usize) -> u64 {
        self.burn_in.unwrap_or(10 * choose2(n) as u64)
    }

    pub fn thin_for(&self, n: usize) -> u64 {
        self.thin.unwrap_or(choose2(n) as u64).max(1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WalkDiagnostics {
    pub burn_in: u64,
    pub thin: u64,
    pub steps: u64,
    pub accepted: u64,
    pub null_proposals: u64,
    pub acceptance_rate: f64,
    pub exactness_checks: u64,
    /// Set if an incrementally tracked statistic ever disagreed with a recomputation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<String>,
}

impl WalkDiagnostics {
    /// No move was ever applied: the walk never left the observed graph.
    pub fn is_stuck(&self) -> bool {
        self.accepted == 0
    }
}

#[derive(Debug, Clone)]
pub struct FiberSample {
    pub graphs: Vec<Graph>,
    pub diagnostics: WalkDiagnostics,
}

/// Sufficient statistic maintained move by move.
struct Tracker {
    model: Model,
    classes: Vec<i64>,
    degrees: Vec<i64>,
    z: BlockAssignment,
}

impl Tracker {
    fn new(model: Model, g: &Graph, z: &BlockAssignment) -> Tracker {
        let mut classes = vec![0; z.num_classes()];
        for d in g.edges() {
            classes[z.dyad_class(d)] += 1;
        }
        let degrees = g.degrees().into_iter().map(|d| d as i64).collect();
        Tracker { model, classes, degrees, z: z.clone() }
    }

    fn update(&mut self, m: &Move) {
        for (dyads, sign) in [(&m.add, 1), (&m.remove, -1)] {
            for d in dyads {
                self.classes[self.z.dyad_class(*d)] += sign;
                self.degrees[d.u()] += sign;
                self.degrees[d.v()] += sign;
            }
        }
    }

    fn current(&self) -> SufficientStatistics {
        let values: Vec<u64> = match self.model {
            Model::Er => self.classes.iter().map(|&x| x as u64).collect(),
            Model::Add => {
                let mut x = vec![0u64; self.z.k()];
                for (u, &d) in self.degrees.iter().enumerate() {
                    x[self.z.block(u)] += d as u64;
                }
                x
            }
            Model::Beta => self.classes.iter().chain(&self.degrees).map(|&x| x as u64).collect(),
        };
        SufficientStatistics { model: self.model, values }
    }
}

/// Runs the walk, calling `on_sample` for each emitted graph and `on_move`
/// for each applied move.
pub fn walk_with<R, S, M>(
    g_obs: &Graph,
    z: &BlockAssignment,
    model: Model,
    settings: &ChainSettings,
    rng: &mut R,
    mut on_sample: S,
    mut on_move: M,
) -> Result<WalkDiagnostics>
where
    R: Rng + ?Sized,
    S: FnMut(&Graph),
    M: FnMut(&Move),
{
    if settings.num_graphs == 0 {
        return Err(Error::InvalidParams("num_graphs must be at least 1".into()));
    }
    let n = g_obs.n();
    let burn_in = settings.burn_in_for(n);
    let thin = settings.thin_for(n);
    let mut state = WalkState::new(g_obs, z)?;
    let observed = SufficientStatistics::compute(model, g_obs, z)?;
    let mut tracker = Tracker::new(model, g_obs, z);
    let mut diag = WalkDiagnostics { burn_in, thin, ..Default::default() };

    let total = burn_in + thin * settings.num_graphs as u64;
    for step in 1..=total {
        match propose(model, &state, rng) {
            Some(m) => {
                state.apply(&m)?;
                tracker.update(&m);
                on_move(&m);
                diag.accepted += 1;
            }
            None => diag.null_proposals += 1,
        }
        if step % EXACTNESS_CHECK_INTERVAL == 0 || step == total {
            diag.exactness_checks += 1;
            let fresh = SufficientStatistics::compute(model, state.graph(), z)?;
            let tracked = tracker.current();
            if diag.drift.is_none() && (fresh != tracked || fresh != observed) {
                diag.drift = Some(format!(
                    "step {step}: observed {:?}, tracked {:?}, recomputed {:?}",
                    observed.values, tracked.values, fresh.values
                ));
            }
        }
        if step > burn_in && (step - burn_in) % thin == 0 {
            on_sample(state.graph());
        }
    }
    diag.steps = total;
    diag.acceptance_rate = diag.accepted as f64 / total as f64;
    Ok(diag)
}

/// Collects `num_graphs` draws from the fiber of `g_obs`.
pub fn walk<R: Rng + ?Sized>(
    g_obs: &Graph,
    z: &BlockAssignment,
    model: Model,
    settings: &ChainSettings,
    rng: &mut R,
) -> Result<FiberSample> {
    let mut graphs = Vec::with_capacity(settings.num_graphs);
    let diagnostics = walk_with(g_obs, z, model, settings, rng, |g| graphs.push(g.clone()), |_| {})?;
    Ok(FiberSample { graphs, diagnostics })
}

/// Every graph sharing the model statistic of `g_obs`, by exhaustive search
/// over edge sets of the same size. Test oracle for small `n`.
pub fn enumerate_fiber(g_obs: &Graph, z: &BlockAssignment, model: Model) -> Result<Vec<Graph>> {
    z.check_graph(g_obs)?;
    let n = g_obs.n();
    let nd = choose2(n);
    if nd > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { dyads: nd, limit: ENUMERATION_LIMIT });
    }
    let target = SufficientStatistics::compute(model, g_obs, z)?;
    let e = g_obs.edge_count();
    let proto = Graph::empty(n);
    let table: Vec<(usize, usize, usize)> = proto.dyads().map(|d| (d.u(), d.v(), z.dyad_class(d))).collect();

    let mut out = Vec::new();
    let mut classes = vec![0u64; z.num_classes()];
    let mut degrees = vec![0u64; n];
    let mut check = |bits: u64| {
        classes.iter_mut().for_each(|x| *x = 0);
        degrees.iter_mut().for_each(|x| *x = 0);
        let mut b = bits;
        while b != 0 {
            let i = b.trailing_zeros() as usize;
            b &= b - 1;
            let (u, v, c) = table[i];
            classes[c] += 1;
            degrees[u] += 1;
            degrees[v] += 1;
        }
        let values: Vec<u64> = match model {
            Model::Er => classes.clone(),
            Model::Add => {
                let mut x = vec![0u64; z.k()];
                for (u, &d) in degrees.iter().enumerate() {
                    x[z.block(u)] += d;
                }
                x
            }
            Model::Beta => classes.iter().chain(degrees.iter()).copied().collect(),
        };
        if values == target.values {
            out.push(Graph::from_bits(n, bits));
        }
    };

    if e == 0 {
        check(0);
        return Ok(out);
    }
    // Gosper's hack over all `nd`-bit words with `e` bits set.
    let limit = 1u64 << nd;
    let mut bits = (1u64 << e) - 1;
    while bits < limit {
        check(bits);
        let c = bits & bits.wrapping_neg();
        let r = bits + c;
        bits = (((r ^ bits) >> 2) / c) | r;
    }
    Ok(out)
}
