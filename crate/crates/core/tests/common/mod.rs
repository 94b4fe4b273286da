#![allow(dead_code)]

use sbm_gof::moves::{apply, Move};
use sbm_gof::graph::choose2;
use sbm_gof::polytope::Verdict;
use sbm_gof::{BlockAssignment, Dyad, Graph};

/// Six-node fixture shared by the move illustrations.
pub fn fixture() -> (Graph, BlockAssignment) {
    let g = Graph::from_edges_1based(6, [(2, 5), (3, 6), (1, 5), (1, 3), (2, 4), (3, 4), (5, 6)]).unwrap();
    let z = BlockAssignment::from_blocks(6, &[&[1, 2], &[3, 4, 5], &[6]]).unwrap();
    (g, z)
}

/// 1-based dyad.
pub fn d(a: usize, b: usize) -> Dyad {
    Dyad::new(a - 1, b - 1)
}

pub fn linear_move() -> Move {
    Move::new(vec![d(2, 3)], vec![d(1, 5)])
}

pub fn quadratic_move() -> Move {
    Move::new(vec![d(2, 6), d(4, 5)], vec![d(2, 4), d(5, 6)])
}

pub fn cubic_move() -> Move {
    Move::new(vec![d(2, 3), d(4, 5), d(4, 6)], vec![d(2, 4), d(3, 4), d(5, 6)])
}

pub fn after(m: &Move) -> Graph {
    apply(&fixture().0, m).unwrap()
}

/// Two-block assignment from a bit mask: node `u` goes to block `mask >> u & 1`.
pub fn two_blocks(n: usize, mask: u32) -> Option<BlockAssignment> {
    let labels: Vec<usize> = (0..n).map(|u| (mask >> u & 1) as usize).collect();
    BlockAssignment::new(2, labels).ok().filter(|z| !z.has_empty_blocks())
}

pub fn balanced(n: usize) -> BlockAssignment {
    let labels: Vec<usize> = (0..n).map(|u| usize::from(u >= n.div_ceil(2))).collect();
    BlockAssignment::new(2, labels).unwrap()
}

pub fn all_graphs(n: usize) -> impl Iterator<Item = Graph> {
    let nd = n * (n - 1) / 2;
    (0..1u64 << nd).map(move |b| Graph::from_bits(n, b))
}

pub fn total_variation(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    0.5 * counts.iter().zip(probs).map(|(&c, &p)| (c as f64 / total as f64 - p).abs()).sum::<f64>()
}

/// Verdict of the hull of all attainable additive statistics: the zonotope
/// spanned by `e_i + e_j` with multiplicity equal to the dyad count of each
/// block pair. Facet normals are orthogonal to `k − 1` generator directions.
pub fn zonotope_verdict(t: &[i64], sizes: &[usize]) -> Verdict {
    let k = sizes.len();
    let mut gens: Vec<(Vec<i64>, i64)> = Vec::new();
    for i in 0..k {
        for j in i..k {
            let cap = if i == j { choose2(sizes[i]) } else { sizes[i] * sizes[j] } as i64;
            if cap > 0 {
                let mut v = vec![0; k];
                v[i] += 1;
                v[j] += 1;
                gens.push((v, cap));
            }
        }
    }
    let normals: Vec<Vec<i64>> = match k {
        1 => vec![vec![1]],
        2 => gens.iter().map(|(g, _)| vec![-g[1], g[0]]).collect(),
        3 => {
            let mut out = Vec::new();
            for a in 0..gens.len() {
                for b in a + 1..gens.len() {
                    let (x, y) = (&gens[a].0, &gens[b].0);
                    let c = vec![x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]];
                    if c.iter().any(|&v| v != 0) {
                        out.push(c);
                    }
                }
            }
            out
        }
        _ => unimplemented!("oracle covers k <= 3"),
    };
    let dot = |a: &[i64], b: &[i64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<i64>();
    let mut boundary = false;
    for c in &normals {
        let hi: i64 = gens.iter().map(|(g, m)| m * dot(c, g).max(0)).sum();
        let lo: i64 = gens.iter().map(|(g, m)| m * dot(c, g).min(0)).sum();
        let x = dot(c, t);
        if x < lo || x > hi {
            return Verdict::Outside;
        }
        boundary |= x == lo || x == hi;
    }
    if boundary {
        Verdict::Boundary
    } else {
        Verdict::Interior
    }
}

pub fn size_vectors(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (1..n).flat_map(|s| size_vectors(n - s, k - 1).into_iter().map(move |mut r| {
        r.insert(0, s);
        r
    }))
    .filter(|r| r.len() == k)
    .collect()
}

pub fn ln_fact(m: usize) -> f64 {
    (2..=m).map(|x| (x as f64).ln()).sum()
}

/// Posterior over partitions into at most `k` labelled blocks, enumerated by
/// restricted growth strings. Weight per labelling: `Π n_c!` times
/// `Π e!(N−e)!/(N+1)!` over block pairs.
pub fn partition_posterior(g: &Graph, k: usize) -> Vec<(Vec<usize>, f64)> {
    let n = g.n();
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        let used = rgs.iter().max().unwrap() + 1;
        if used <= k {
            let z = BlockAssignment::new(k, rgs.clone()).unwrap();
            let mut lp: f64 = (0..used).map(|c| ln_fact(rgs.iter().filter(|&&x| x == c).count())).sum();
            let mut e = vec![vec![0usize; used]; used];
            let mut cap = vec![vec![0usize; used]; used];
            for u in 0..n {
                for v in u + 1..n {
                    let (a, b) = (rgs[u].min(rgs[v]), rgs[u].max(rgs[v]));
                    cap[a][b] += 1;
                    e[a][b] += usize::from(g.adjacent(u, v));
                }
            }
            for a in 0..used {
                for b in a..used {
                    lp += ln_fact(e[a][b]) + ln_fact(cap[a][b] - e[a][b]) - ln_fact(cap[a][b] + 1);
                }
            }
            let labellings: f64 = (0..used).map(|i| (k - i) as f64).product();
            out.push((z.labels().to_vec(), lp + labellings.ln()));
        }
        // Next restricted growth string.
        let mut i = n;
        loop {
            if i == 1 {
                let max = out.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = out.iter().map(|x| (x.1 - max).exp()).sum();
                return out.into_iter().map(|(l, w)| (l, (w - max).exp() / total)).collect();
            }
            i -= 1;
            let prefix_max = rgs[..i].iter().max().copied().unwrap_or(0);
            if rgs[i] <= prefix_max && rgs[i] + 1 < k {
                rgs[i] += 1;
                rgs[i + 1..].iter_mut().for_each(|x| *x = 0);
                break;
            }
        }
    }
}
