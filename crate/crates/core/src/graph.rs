//! Graphs, block assignments and the sufficient statistics of the three
//! block models.
//!
//! Nodes are 0-based internally. File formats and the CLI use 1-based labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unordered node pair `{u, v}` with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", try_from = "[usize; 2]")]
pub struct Dyad {
    u: usize,
    v: usize,
}

impl Dyad {
    /// Builds the dyad `{a, b}`. Panics on a loop; use [`Dyad::try_new`] for
    /// untrusted input.
    pub fn new(a: usize, b: usize) -> Dyad {
        Dyad::try_new(a, b).expect("self-loop dyad")
    }

    pub fn try_new(a: usize, b: usize) -> Result<Dyad> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Dyad { u: a, v: b }),
            std::cmp::Ordering::Greater => Ok(Dyad { u: b, v: a }),
            std::cmp::Ordering::Equal => Err(Error::SelfLoop(a)),
        }
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn contains(&self, x: usize) -> bool {
        self.u == x || self.v == x
    }
}

impl From<Dyad> for [usize; 2] {
    fn from(d: Dyad) -> Self {
        [d.u + 1, d.v + 1]
    }
}

impl TryFrom<[usize; 2]> for Dyad {
    type Error = Error;

    fn try_from(p: [usize; 2]) -> Result<Self> {
        if p[0] == 0 || p[1] == 0 {
            return Err(Error::Parse("node labels are 1-based".into()));
        }
        Dyad::try_new(p[0] - 1, p[1] - 1)
    }
}

/// Number of unordered pairs of `n` items.
pub fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Simple undirected graph stored as a packed upper-triangular bit array over
/// the `C(n,2)` dyads.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    bits: Vec<u64>,
    edges: usize,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let edges: Vec<(usize, usize)> = self.edges().map(|d| (d.u + 1, d.v + 1)).collect();
        f.debug_struct("Graph").field("n", &self.n).field("edges", &edges).finish()
    }
}

impl Graph {
    pub fn empty(n: usize) -> Graph {
        let words = choose2(n).div_ceil(64);
        Graph { n, bits: vec![0; words], edges: 0 }
    }

    pub fn complete(n: usize) -> Graph {
        let mut g = Graph::empty(n);
        for idx in 0..g.num_dyads() {
            g.set_index(idx, true);
        }
        g
    }

    /// Builds a graph from 0-based edges. Duplicate edges are merged.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::empty(n);
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::NodeOutOfRange { node: a.max(b) + 1, n });
            }
            let d = Dyad::try_new(a, b)?;
            g.set_edge(d, true);
        }
        Ok(g)
    }

    /// Builds a graph from 1-based edges, the convention of every figure and file format.
    pub fn from_edges_1based<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut zero = Vec::new();
        for (a, b) in edges {
            if a == 0 || b == 0 {
                return Err(Error::Parse("node labels are 1-based".into()));
            }
            zero.push((a - 1, b - 1));
        }
        Graph::from_edges(n, zero)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_dyads(&self) -> usize {
        choose2(self.n)
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Position of a dyad in the row-major upper-triangular order.
    #[inline]
    pub fn dyad_index(&self, d: Dyad) -> usize {
        let (u, v, n) = (d.u, d.v, self.n);
        u * (2 * n - u - 1) / 2 + (v - u - 1)
    }

    /// Inverse of [`Graph::dyad_index`].
    pub fn dyad_at(&self, mut idx: usize) -> Dyad {
        let n = self.n;
        let mut u = 0;
        while idx >= n - u - 1 {
            idx -= n - u - 1;
            u += 1;
        }
        Dyad { u, v: u + 1 + idx }
    }

    #[inline]
    pub fn has_index(&self, idx: usize) -> bool {
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    #[inline]
    pub fn has_edge(&self, d: Dyad) -> bool {
        self.has_index(self.dyad_index(d))
    }

    /// `g_uv` for arbitrary nodes; loops read as absent.
    #[inline]
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        a != b && self.has_edge(Dyad::new(a, b))
    }

    #[inline]
    fn set_index(&mut self, idx: usize, on: bool) {
        let word = &mut self.bits[idx / 64];
        let mask = 1u64 << (idx % 64);
        let was = *word & mask != 0;
        if on && !was {
            *word |= mask;
            self.edges += 1;
        } else if !on && was {
            *word &= !mask;
            self.edges -= 1;
        }
    }

    pub fn set_edge(&mut self, d: Dyad, on: bool) {
        let idx = self.dyad_index(d);
        self.set_index(idx, on);
    }

    pub fn toggle(&mut self, d: Dyad) {
        let idx = self.dyad_index(d);
        let on = !self.has_index(idx);
        self.set_index(idx, on);
    }

    pub fn degree(&self, u: usize) -> usize {
        (0..self.n).filter(|&v| self.adjacent(u, v)).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for d in self.edges() {
            deg[d.u] += 1;
            deg[d.v] += 1;
        }
        deg
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| self.adjacent(u, v))
    }

    /// Present dyads in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = Dyad> + '_ {
        let n = self.n;
        (0..n).flat_map(move |u| {
            ((u + 1)..n).filter_map(move |v| {
                let d = Dyad { u, v };
                self.has_edge(d).then_some(d)
            })
        })
    }

    /// Every dyad in canonical order.
    pub fn dyads(&self) -> impl Iterator<Item = Dyad> {
        let n = self.n;
        (0..n).flat_map(move |u| ((u + 1)..n).map(move |v| Dyad { u, v }))
    }

    /// Packs the adjacency into a single integer; only for `C(n,2) <= 64`.
    pub fn to_bits(&self) -> u64 {
        assert!(self.num_dyads() <= 64);
        self.bits.first().copied().unwrap_or(0)
    }

    pub fn from_bits(n: usize, bits: u64) -> Graph {
        assert!(choose2(n) <= 64);
        let mut g = Graph::empty(n);
        let nd = choose2(n);
        let bits = if nd < 64 { bits & ((1u64 << nd) - 1) } else { bits };
        if let Some(w) = g.bits.first_mut() {
            *w = bits;
        }
        g.edges = bits.count_ones() as usize;
        g
    }
}

/// Block assignment `z : [n] -> [k]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BlockAssignmentRepr", into = "BlockAssignmentRepr")]
pub struct BlockAssignment {
    k: usize,
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct BlockAssignmentRepr {
    k: usize,
    z: Vec<usize>,
}

impl TryFrom<BlockAssignmentRepr> for BlockAssignment {
    type Error = Error;

    fn try_from(r: BlockAssignmentRepr) -> Result<Self> {
        BlockAssignment::from_1based(r.k, &r.z)
    }
}

impl From<BlockAssignment> for BlockAssignmentRepr {
    fn from(z: BlockAssignment) -> Self {
        BlockAssignmentRepr { k: z.k, z: z.to_1based() }
    }
}

impl BlockAssignment {
    /// Builds an assignment from 0-based labels. Empty blocks are allowed.
    pub fn new(k: usize, labels: Vec<usize>) -> Result<BlockAssignment> {
        if k == 0 {
            return Err(Error::InvalidAssignment("k must be positive".into()));
        }
        let mut sizes = vec![0; k];
        for (u, &b) in labels.iter().enumerate() {
            if b >= k {
                return Err(Error::InvalidAssignment(format!(
                    "node {} has block {} but k = {k}",
                    u + 1,
                    b + 1
                )));
            }
            sizes[b] += 1;
        }
        Ok(BlockAssignment { k, labels, sizes })
    }

    pub fn from_1based(k: usize, labels: &[usize]) -> Result<BlockAssignment> {
        if labels.contains(&0) {
            return Err(Error::InvalidAssignment("block labels are 1-based".into()));
        }
        BlockAssignment::new(k, labels.iter().map(|&b| b - 1).collect())
    }

    /// Builds an assignment from explicit 1-based blocks, e.g. `[[1,2],[3,4,5],[6]]`.
    pub fn from_blocks(n: usize, blocks: &[&[usize]]) -> Result<BlockAssignment> {
        let mut labels = vec![usize::MAX; n];
        for (b, members) in blocks.iter().enumerate() {
            for &u in members.iter() {
                if u == 0 || u > n {
                    return Err(Error::NodeOutOfRange { node: u, n });
                }
                labels[u - 1] = b;
            }
        }
        if let Some(u) = labels.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidAssignment(format!("node {} has no block", u + 1)));
        }
        BlockAssignment::new(blocks.len(), labels)
    }

    /// Everyone in block 1.
    pub fn single(n: usize) -> BlockAssignment {
        BlockAssignment { k: 1, labels: vec![0; n], sizes: vec![n] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn block(&self, u: usize) -> usize {
        self.labels[u]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn to_1based(&self) -> Vec<usize> {
        self.labels.iter().map(|b| b + 1).collect()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn members(&self, block: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().enumerate().filter(move |(_, &b)| b == block).map(|(u, _)| u)
    }

    pub fn empty_blocks(&self) -> Vec<usize> {
        (0..self.k).filter(|&b| self.sizes[b] == 0).collect()
    }

    pub fn has_empty_blocks(&self) -> bool {
        self.sizes.contains(&0)
    }

    /// Errors with the first empty block, for fitting routines that need every block populated.
    pub fn require_nonempty(&self) -> Result<()> {
        match self.empty_blocks().first() {
            Some(&b) => Err(Error::EmptyBlock(b + 1)),
            None => Ok(()),
        }
    }

    pub fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: g.n(), found: self.n() });
        }
        Ok(())
    }

    /// Number of block-pair classes, `C(k+1, 2)`.
    pub fn num_classes(&self) -> usize {
        self.k * (self.k + 1) / 2
    }

    /// Index of the block pair `{i, j}` in the row-major upper-triangular order.
    #[inline]
    pub fn class_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.k - i * i.saturating_sub(1) / 2 + (j - i)
    }

    /// Block pair of a class index.
    pub fn class_pair(&self, mut c: usize) -> (usize, usize) {
        let mut i = 0;
        while c >= self.k - i {
            c -= self.k - i;
            i += 1;
        }
        (i, i + c)
    }

    #[inline]
    pub fn dyad_class(&self, d: Dyad) -> usize {
        self.class_index(self.labels[d.u], self.labels[d.v])
    }

    /// Number of dyads in each block-pair class.
    pub fn class_capacity(&self) -> Vec<usize> {
        let mut cap = vec![0; self.num_classes()];
        for i in 0..self.k {
            for j in i..self.k {
                let c = self.class_index(i, j);
                cap[c] = if i == j { choose2(self.sizes[i]) } else { self.sizes[i] * self.sizes[j] };
            }
        }
        cap
    }

    /// Renumbers blocks by order of first occurrence so that assignments
    /// describing the same partition compare equal.
    pub fn canonical(&self) -> BlockAssignment {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&b| {
                if map[b] == usize::MAX {
                    map[b] = next;
                    next += 1;
                }
                map[b]
            })
            .collect();
        BlockAssignment::new(self.k, labels).expect("relabeling stays in range")
    }
}

/// The three model variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "er")]
    Er,
    #[serde(rename = "add")]
    Add,
    #[serde(rename = "beta")]
    Beta,
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Model> {
        match s.to_ascii_lowercase().as_str() {
            "er" | "er-sbm" => Ok(Model::Er),
            "add" | "additive" => Ok(Model::Add),
            "beta" | "beta-sbm" => Ok(Model::Beta),
            other => Err(Error::Parse(format!("unknown model `{other}`"))),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::Er => "er",
            Model::Add => "add",
            Model::Beta => "beta",
        })
    }
}

/// Model-tagged sufficient statistic vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SufficientStatistics {
    pub model: Model,
    pub values: Vec<u64>,
}

impl SufficientStatistics {
    pub fn compute(model: Model, g: &Graph, z: &BlockAssignment) -> Result<SufficientStatistics> {
        match model {
            Model::Er => t_er(g, z),
            Model::Add => t_add(g, z),
            Model::Beta => t_beta(g, z),
        }
    }
}

fn er_counts(g: &Graph, z: &BlockAssignment) -> Vec<u64> {
    let mut t = vec![0u64; z.num_classes()];
    for d in g.edges() {
        t[z.dyad_class(d)] += 1;
    }
    t
}

/// Block-pair edge counts in the order (1,1),(1,2),…,(1,k),(2,2),…,(k,k).
pub fn t_er(g: &Graph, z: &BlockAssignment) -> Result<SufficientStatistics> {
    z.check_graph(g)?;
    Ok(SufficientStatistics { model: Model::Er, values: er_counts(g, z) })
}

/// Per-block degree sums.
pub fn t_add(g: &Graph, z: &BlockAssignment) -> Result<SufficientStatistics> {
    z.check_graph(g)?;
    let mut x = vec![0u64; z.k()];
    for d in g.edges() {
        x[z.block(d.u)] += 1;
        x[z.block(d.v)] += 1;
    }
    Ok(SufficientStatistics { model: Model::Add, values: x })
}

/// Block-pair counts followed by the degree sequence.
pub fn t_beta(g: &Graph, z: &BlockAssignment) -> Result<SufficientStatistics> {
    z.check_graph(g)?;
    let mut values = er_counts(g, z);
    values.extend(g.degrees().into_iter().map(|d| d as u64));
    Ok(SufficientStatistics { model: Model::Beta, values })
}

/// `m[u][i]`: number of neighbours of `u` inside block `i`.
pub fn degrees_into_blocks(g: &Graph, z: &BlockAssignment) -> Result<Vec<Vec<usize>>> {
    z.check_graph(g)?;
    let mut m = vec![vec![0usize; z.k()]; g.n()];
    for d in g.edges() {
        m[d.u][z.block(d.v)] += 1;
        m[d.v][z.block(d.u)] += 1;
    }
    Ok(m)
}
