mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sbm_gof::blocks::{AssignmentDistribution, Provenance};
use sbm_gof::gof::{chi2_bc, GofKind};
use sbm_gof::io::{parse_blocks, parse_edge_list, write_blocks, write_edge_list};
use sbm_gof::models::mle_er;
use sbm_gof::moves::{candidate_moves, propose, validate, WalkState};
use sbm_gof::polytope::{mle_exists, Verdict};
use sbm_gof::sampler::{walk_with, ChainSettings};
use sbm_gof::testing::{test_known, TestSettings};
use sbm_gof::{BlockAssignment, Graph, Model, SufficientStatistics};

const MODELS: [Model; 3] = [Model::Er, Model::Add, Model::Beta];

fn graph_and_blocks(max_n: usize, max_k: usize) -> impl Strategy<Value = (Graph, BlockAssignment)> {
    (2..=max_n, 1..=max_k).prop_flat_map(|(n, k)| {
        let nd = n * (n - 1) / 2;
        (
            proptest::collection::vec(any::<bool>(), nd),
            proptest::collection::vec(0..k, n),
            Just((n, k)),
        )
            .prop_map(|(bits, labels, (n, k))| {
                let mut g = Graph::empty(n);
                for (i, b) in bits.into_iter().enumerate() {
                    if b {
                        g.set_edge(g.dyad_at(i), true);
                    }
                }
                (g, BlockAssignment::new(k, labels).unwrap())
            })
    })
}

fn nonempty(max_n: usize, max_k: usize) -> impl Strategy<Value = (Graph, BlockAssignment)> {
    graph_and_blocks(max_n, max_k).prop_filter("empty block", |(_, z)| !z.has_empty_blocks())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn proposals_preserve_statistics((g, z) in graph_and_blocks(12, 4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for model in MODELS {
            let t = SufficientStatistics::compute(model, &g, &z).unwrap();
            let mut s = WalkState::new(&g, &z).unwrap();
            for _ in 0..200 {
                if let Some(m) = propose(model, &s, &mut rng) {
                    prop_assert!(validate(&m, s.graph(), &z, model));
                    s.apply(&m).unwrap();
                }
            }
            prop_assert_eq!(SufficientStatistics::compute(model, s.graph(), &z).unwrap(), t);
        }
    }

    #[test]
    fn enumerated_candidates_validate((g, z) in graph_and_blocks(7, 3)) {
        for model in MODELS {
            for m in candidate_moves(&g, &z, model) {
                prop_assert!(validate(&m, &g, &z, model));
                prop_assert!(validate(&m.reversed(), &sbm_gof::moves::apply(&g, &m).unwrap(), &z, model));
            }
        }
    }

    #[test]
    fn walk_emits_fiber_members((g, z) in graph_and_blocks(9, 3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for model in MODELS {
            let t = SufficientStatistics::compute(model, &g, &z).unwrap();
            let settings = ChainSettings { burn_in: Some(10), thin: Some(3), num_graphs: 20 };
            let mut bad = 0;
            let diag = walk_with(&g, &z, model, &settings, &mut rng, |h| {
                bad += usize::from(SufficientStatistics::compute(model, h, &z).unwrap() != t);
            }, |_| {}).unwrap();
            prop_assert_eq!(bad, 0);
            prop_assert!(diag.drift.is_none());
            prop_assert!((0.0..=1.0).contains(&diag.acceptance_rate));
        }
    }

    #[test]
    fn bc_invariant_under_block_relabelling((g, z) in nonempty(10, 3), swap in any::<prop::sample::Index>()) {
        let k = z.k();
        let a = swap.index(k);
        let b = (a + 1) % k;
        let labels: Vec<usize> = z.labels().iter().map(|&x| if x == a { b } else if x == b { a } else { x }).collect();
        let w = BlockAssignment::new(k, labels).unwrap();
        let x = chi2_bc(&g, &z, &mle_er(&g, &z).unwrap().q).unwrap().value;
        let y = chi2_bc(&g, &w, &mle_er(&g, &w).unwrap().q).unwrap().value;
        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        prop_assert_eq!(z.canonical(), w.canonical());
    }

    #[test]
    fn bc_invariant_under_within_block_permutation((g, z) in nonempty(10, 3), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = g.n();
        let mut perm: Vec<usize> = (0..n).collect();
        for block in 0..z.k() {
            let members: Vec<usize> = z.members(block).collect();
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            for (from, to) in members.into_iter().zip(shuffled) {
                perm[from] = to;
            }
        }
        let h = Graph::from_edges(n, g.edges().map(|d| (perm[d.u()], perm[d.v()]))).unwrap();
        let x = chi2_bc(&g, &z, &mle_er(&g, &z).unwrap().q).unwrap().value;
        let y = chi2_bc(&h, &z, &mle_er(&h, &z).unwrap().q).unwrap().value;
        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
    }

    #[test]
    fn canonical_is_idempotent((_, z) in graph_and_blocks(12, 5)) {
        let c = z.canonical();
        prop_assert_eq!(c.canonical(), c.clone());
        prop_assert_eq!(c.sizes().iter().sum::<usize>(), z.n());
    }

    #[test]
    fn text_formats_roundtrip((g, z) in graph_and_blocks(15, 4)) {
        prop_assert_eq!(parse_edge_list(&write_edge_list(&g)).unwrap(), g);
        prop_assert_eq!(parse_blocks(&write_blocks(&z), Some(z.k())).unwrap(), z);
    }

    #[test]
    fn distribution_weights_sum_to_one(
        draws in proptest::collection::vec(proptest::collection::vec(0..3usize, 6), 1..40),
        threshold in 0.0..0.3f64,
    ) {
        let zs: Vec<BlockAssignment> = draws.into_iter().map(|l| BlockAssignment::new(3, l).unwrap()).collect();
        let d = AssignmentDistribution::from_draws(Provenance::Posterior, &zs).unwrap();
        let t = d.truncated(threshold, None);
        for dist in [&d, &t] {
            let total: f64 = dist.atoms().iter().map(|a| a.weight).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(dist.atoms().iter().all(|a| a.z.canonical() == a.z));
        }
        prop_assert!(t.atoms().iter().any(|a| &a.z == d.mode()));
    }

    #[test]
    fn attained_statistics_lie_in_polytope((g, z) in nonempty(14, 4)) {
        for model in [Model::Er, Model::Add] {
            let (_, v) = mle_exists(model, &g, &z).unwrap();
            prop_assert_ne!(v.verdict, Verdict::Outside);
        }
    }

    #[test]
    fn er_estimate_matches_counts((g, z) in nonempty(14, 4)) {
        let p = mle_er(&g, &z).unwrap();
        let t = SufficientStatistics::compute(Model::Er, &g, &z).unwrap().values;
        let caps = z.class_capacity();
        for c in 0..z.num_classes() {
            let (i, j) = z.class_pair(c);
            prop_assert!((p.q[i][j] * caps[c] as f64 - t[c] as f64).abs() < 1e-9);
            prop_assert_eq!(p.q[i][j], p.q[j][i]);
        }
    }

    #[test]
    fn dyad_index_roundtrip(n in 2usize..60, a in 0usize..60, b in 0usize..60) {
        prop_assume!(a < n && b < n && a != b);
        let g = Graph::empty(n);
        let d = sbm_gof::Dyad::new(a, b);
        prop_assert_eq!(g.dyad_at(g.dyad_index(d)), d);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn p_values_lie_in_unit_interval((g, z) in nonempty(8, 2), seed in any::<u64>(), plus_one in any::<bool>()) {
        let settings = TestSettings { chain: ChainSettings::with_num_graphs(50), plus_one, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for model in [Model::Er, Model::Add] {
            if let Ok(r) = test_known(&g, &z, model, GofKind::ChiSqBC, &settings, &mut rng) {
                prop_assert!((0.0..=1.0).contains(&r.p_value));
                if plus_one {
                    prop_assert!(r.p_value > 0.0);
                }
            }
        }
    }
}
