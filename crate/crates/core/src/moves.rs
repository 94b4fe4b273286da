//! Markov moves on graph fibers.
//!
//! A move removes a set of present dyads and inserts a set of absent ones.
//! Three families are generated:
//!
//! * linear: swap one edge for a non-edge in the same block-pair class
//!   (preserves the block-pair counts, hence every statistic of the ER and
//!   additive models);
//! * quadratic: exchange along an alternating 4-cycle (preserves degrees);
//! * cubic: exchange along an alternating closed walk of length 6, which may
//!   revisit a node (preserves degrees).
//!
//! For the β model the quadratic and cubic moves must also preserve the
//! multiset of block-pair classes, so that the block-pair counts stay fixed.
//!
//! Every proposal draws its ingredients uniformly from sets whose sizes are
//! constant on a fiber (edges, or present/absent dyads of one class), so the
//! probability of proposing a move equals that of proposing its reverse from
//! the resulting graph. The uniform distribution on the fiber is therefore
//! the stationary law of the walk with every valid proposal accepted.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BlockAssignment, Dyad, Graph, Model, SufficientStatistics};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Move {
    pub add: Vec<Dyad>,
    pub remove: Vec<Dyad>,
}

impl Move {
    pub fn new(mut add: Vec<Dyad>, mut remove: Vec<Dyad>) -> Move {
        add.sort();
        remove.sort();
        Move { add, remove }
    }

    pub fn reversed(&self) -> Move {
        Move { add: self.remove.clone(), remove: self.add.clone() }
    }

    pub fn is_empty(&self) -> bool {
        self.add.is_empty() && self.remove.is_empty()
    }

    /// Degree of the binomial: 1 linear, 2 quadratic, 3 cubic.
    pub fn degree(&self) -> usize {
        self.add.len().max(self.remove.len())
    }

    /// Disjoint, duplicate-free add/remove sets.
    pub fn is_well_formed(&self) -> bool {
        let mut all: Vec<Dyad> = self.add.iter().chain(&self.remove).copied().collect();
        all.sort();
        all.windows(2).all(|w| w[0] != w[1])
    }

    pub fn is_applicable(&self, g: &Graph) -> bool {
        self.is_well_formed()
            && self.add.iter().chain(&self.remove).all(|d| d.v() < g.n())
            && self.add.iter().all(|&d| !g.has_edge(d))
            && self.remove.iter().all(|&d| g.has_edge(d))
    }
}

/// Applies a move, returning the new graph.
pub fn apply(g: &Graph, m: &Move) -> Result<Graph> {
    if !m.is_applicable(g) {
        return Err(Error::InapplicableMove(format!("{m:?}")));
    }
    let mut h = g.clone();
    for &d in &m.remove {
        h.set_edge(d, false);
    }
    for &d in &m.add {
        h.set_edge(d, true);
    }
    Ok(h)
}

/// True iff `m` applies to `g` and leaves the model's statistic unchanged.
pub fn validate(m: &Move, g: &Graph, z: &BlockAssignment, model: Model) -> bool {
    if z.n() != g.n() || !m.is_applicable(g) {
        return false;
    }
    let h = match apply(g, m) {
        Ok(h) => h,
        Err(_) => return false,
    };
    match (SufficientStatistics::compute(model, g, z), SufficientStatistics::compute(model, &h, z)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

const NONE: u32 = u32::MAX;

/// Mutable graph plus the dyad indices the proposers sample from.
#[derive(Debug, Clone)]
pub struct WalkState {
    g: Graph,
    z: BlockAssignment,
    table: Vec<Dyad>,
    class_of: Vec<u32>,
    present: Vec<Vec<u32>>,
    absent: Vec<Vec<u32>>,
    /// Position of each dyad in its class list (present or absent).
    pos: Vec<u32>,
    edges: Vec<u32>,
    /// Position of each present dyad in `edges`.
    epos: Vec<u32>,
}

impl WalkState {
    pub fn new(g: &Graph, z: &BlockAssignment) -> Result<WalkState> {
        z.check_graph(g)?;
        let nd = g.num_dyads();
        let nc = z.num_classes();
        let mut s = WalkState {
            g: g.clone(),
            z: z.clone(),
            table: g.dyads().collect(),
            class_of: Vec::with_capacity(nd),
            present: vec![Vec::new(); nc],
            absent: vec![Vec::new(); nc],
            pos: vec![NONE; nd],
            edges: Vec::with_capacity(g.edge_count()),
            epos: vec![NONE; nd],
        };
        for (idx, d) in g.dyads().enumerate() {
            let c = z.dyad_class(d);
            s.class_of.push(c as u32);
            let list = if g.has_index(idx) { &mut s.present[c] } else { &mut s.absent[c] };
            s.pos[idx] = list.len() as u32;
            list.push(idx as u32);
            if g.has_index(idx) {
                s.epos[idx] = s.edges.len() as u32;
                s.edges.push(idx as u32);
            }
        }
        Ok(s)
    }

    pub fn graph(&self) -> &Graph {
        &self.g
    }

    pub fn assignment(&self) -> &BlockAssignment {
        &self.z
    }

    pub fn into_graph(self) -> Graph {
        self.g
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Present-dyad count per class (the ER statistic), maintained incrementally.
    pub fn class_counts(&self) -> Vec<u64> {
        self.present.iter().map(|l| l.len() as u64).collect()
    }

    fn detach(list: &mut Vec<u32>, pos: &mut [u32], idx: usize) {
        let p = pos[idx] as usize;
        let last = list.pop().expect("dyad listed");
        if last as usize != idx {
            list[p] = last;
            pos[last as usize] = p as u32;
        }
    }

    fn flip(&mut self, idx: usize, on: bool) {
        let c = self.class_of[idx] as usize;
        if on {
            Self::detach(&mut self.absent[c], &mut self.pos, idx);
            self.pos[idx] = self.present[c].len() as u32;
            self.present[c].push(idx as u32);
            self.epos[idx] = self.edges.len() as u32;
            self.edges.push(idx as u32);
        } else {
            Self::detach(&mut self.present[c], &mut self.pos, idx);
            self.pos[idx] = self.absent[c].len() as u32;
            self.absent[c].push(idx as u32);
            let p = self.epos[idx] as usize;
            let last = self.edges.pop().expect("edge listed");
            if last as usize != idx {
                self.edges[p] = last;
                self.epos[last as usize] = p as u32;
            }
            self.epos[idx] = NONE;
        }
        self.g.set_edge(self.table[idx], on);
    }

    /// Applies a move in place.
    pub fn apply(&mut self, m: &Move) -> Result<()> {
        if !m.is_applicable(&self.g) {
            return Err(Error::InapplicableMove(format!("{m:?}")));
        }
        for &d in &m.remove {
            let idx = self.g.dyad_index(d);
            self.flip(idx, false);
        }
        for &d in &m.add {
            let idx = self.g.dyad_index(d);
            self.flip(idx, true);
        }
        Ok(())
    }

    fn random_oriented_edge<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let idx = self.edges[rng.gen_range(0..self.edges.len())] as usize;
        let d = self.table[idx];
        if rng.gen::<bool>() {
            (d.u(), d.v())
        } else {
            (d.v(), d.u())
        }
    }
}

/// Linear move: pick a class uniformly, then a present and an absent dyad of it.
pub fn propose_linear<R: Rng + ?Sized>(s: &WalkState, rng: &mut R) -> Option<Move> {
    let c = rng.gen_range(0..s.present.len());
    let (p, a) = (&s.present[c], &s.absent[c]);
    if p.is_empty() || a.is_empty() {
        return None;
    }
    let out = s.table[p[rng.gen_range(0..p.len())] as usize];
    let inn = s.table[a[rng.gen_range(0..a.len())] as usize];
    Some(Move { add: vec![inn], remove: vec![out] })
}

/// Reads `nodes` as the closed walk `n0 n1 … n_{L-1} n0`, removing the dyads
/// `{n0,n1}, {n2,n3}, …` and adding `{n1,n2}, {n3,n4}, …, {n_{L-1},n0}`.
/// Returns `None` unless the result is a valid move on `g`; with
/// `same_classes` the multiset of block-pair classes must also be preserved.
pub fn alternating_walk(g: &Graph, z: &BlockAssignment, nodes: &[usize], same_classes: bool) -> Option<Move> {
    let len = nodes.len();
    debug_assert!(len == 4 || len == 6);
    let mut rem = [Dyad::new(0, 1); 3];
    let mut add = [Dyad::new(0, 1); 3];
    let half = len / 2;
    for i in 0..half {
        let (a, b, c) = (nodes[2 * i], nodes[2 * i + 1], nodes[(2 * i + 2) % len]);
        rem[i] = Dyad::try_new(a, b).ok()?;
        add[i] = Dyad::try_new(b, c).ok()?;
        if !g.has_edge(rem[i]) || g.has_edge(add[i]) {
            return None;
        }
    }
    let (rem, add) = (&mut rem[..half], &mut add[..half]);
    rem.sort();
    add.sort();
    if rem.windows(2).any(|w| w[0] == w[1]) || add.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    if same_classes {
        let mut cr = [0usize; 3];
        let mut ca = [0usize; 3];
        for i in 0..half {
            cr[i] = z.dyad_class(rem[i]);
            ca[i] = z.dyad_class(add[i]);
        }
        cr[..half].sort();
        ca[..half].sort();
        if cr[..half] != ca[..half] {
            return None;
        }
    }
    Some(Move { add: add.to_vec(), remove: rem.to_vec() })
}

fn propose_walk<R: Rng + ?Sized>(s: &WalkState, rng: &mut R, len: usize, same_classes: bool) -> Option<Move> {
    if s.edges.is_empty() {
        return None;
    }
    let mut nodes = [0usize; 6];
    for i in 0..len / 2 {
        let (a, b) = s.random_oriented_edge(rng);
        nodes[2 * i] = a;
        nodes[2 * i + 1] = b;
    }
    alternating_walk(&s.g, &s.z, &nodes[..len], same_classes)
}

pub fn propose_er<R: Rng + ?Sized>(s: &WalkState, rng: &mut R) -> Option<Move> {
    propose_linear(s, rng)
}

/// Half linear moves, half alternating 4-cycles.
pub fn propose_add<R: Rng + ?Sized>(s: &WalkState, rng: &mut R) -> Option<Move> {
    if rng.gen::<bool>() {
        propose_linear(s, rng)
    } else {
        propose_walk(s, rng, 4, false)
    }
}

/// Half class-preserving 4-cycles, half class-preserving 6-walks.
pub fn propose_beta<R: Rng + ?Sized>(s: &WalkState, rng: &mut R) -> Option<Move> {
    if rng.gen::<bool>() {
        propose_walk(s, rng, 4, true)
    } else {
        propose_walk(s, rng, 6, true)
    }
}

pub fn propose<R: Rng + ?Sized>(model: Model, s: &WalkState, rng: &mut R) -> Option<Move> {
    match model {
        Model::Er => propose_er(s, rng),
        Model::Add => propose_add(s, rng),
        Model::Beta => propose_beta(s, rng),
    }
}

/// Calls `f` on every move the model's proposer can generate from `g`
/// (possibly more than once per move).
pub fn for_each_candidate<F: FnMut(&Move)>(g: &Graph, z: &BlockAssignment, model: Model, mut f: F) {
    let edges: Vec<(usize, usize)> = g.edges().flat_map(|d| [(d.u(), d.v()), (d.v(), d.u())]).collect();
    if matches!(model, Model::Er | Model::Add) {
        let absent: Vec<Dyad> = g.dyads().filter(|&d| !g.has_edge(d)).collect();
        for out in g.edges() {
            for &inn in absent.iter().filter(|&&d| z.dyad_class(d) == z.dyad_class(out)) {
                f(&Move { add: vec![inn], remove: vec![out] });
            }
        }
    }
    if model == Model::Er {
        return;
    }
    let same = model == Model::Beta;
    for &(a, b) in &edges {
        for &(c, d) in &edges {
            if let Some(m) = alternating_walk(g, z, &[a, b, c, d], same) {
                f(&m);
            }
            if model == Model::Beta {
                for &(e, h) in &edges {
                    if let Some(m) = alternating_walk(g, z, &[a, b, c, d, e, h], true) {
                        f(&m);
                    }
                }
            }
        }
    }
}

/// Distinct candidate moves from `g`.
pub fn candidate_moves(g: &Graph, z: &BlockAssignment, model: Model) -> Vec<Move> {
    let mut out = std::collections::BTreeSet::new();
    for_each_candidate(g, z, model, |m| {
        out.insert((m.add.clone(), m.remove.clone()));
    });
    out.into_iter().map(|(add, remove)| Move { add, remove }).collect()
}
