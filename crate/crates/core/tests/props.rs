//! Property tests for the algebraic invariants.

mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tspflow::flows::{grad_g_p, penalty_value, random_orthogonal};
use tspflow::instance::*;
use tspflow::linalg::gen_lie_bracket;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tour_cost_invariant_under_rotation_and_reversal(
        seed in 0u64..1000,
        n in 4usize..9,
        rot in 0usize..8,
    ) {
        let d = random_matrix(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let tour = shuffled_tour(n, &mut rng);
        let base = tour_cost(&d, &tour).unwrap();

        let rotated: Vec<usize> = (0..n).map(|i| tour.order()[(i + rot % n) % n]).collect();
        let rotated = Tour::new(rotated).unwrap();
        prop_assert!((tour_cost(&d, &rotated).unwrap() - base).abs() < 1e-9);

        let mut reversed = tour.order().to_vec();
        reversed.reverse();
        let reversed = Tour::new(reversed).unwrap();
        prop_assert!((tour_cost(&d, &reversed).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn trace_cost_is_twice_tour_cost(seed in 0u64..1000, n in 4usize..9) {
        let d = random_matrix(n, seed);
        let t = TourMatrix::undirected_cycle(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
        let tour = shuffled_tour(n, &mut rng);
        let p = permutation_from_tour(&tour);
        let trace = trace_cost(&d, &t, &p).unwrap();
        let plain = tour_cost(&d, &tour).unwrap();
        prop_assert!((trace - 2.0 * plain).abs() <= 1e-9 * plain.max(1.0));
    }

    #[test]
    fn generalized_bracket_is_skew(seed in 0u64..1000, n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = nalgebra::DMatrix::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -2.0..2.0));
        let b = nalgebra::DMatrix::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -2.0..2.0));
        let g = gen_lie_bracket(&a, &b).unwrap();
        prop_assert!((&g + g.transpose()).norm() <= 1e-12 * g.norm().max(1.0));
    }

    #[test]
    fn penalty_nonnegative_on_orthogonal_zero_on_permutations(
        seed in 0u64..1000,
        n in 2usize..8,
        flip in proptest::bool::ANY,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_orthogonal(n, &mut rng, flip);
        prop_assert!(penalty_value(&q) >= -1e-10);

        let tour = shuffled_tour(n, &mut rng);
        let p = permutation_from_tour(&tour);
        prop_assert!(penalty_value(&p).abs() <= 1e-12);
        prop_assert!(grad_g_p(&p).norm() <= 1e-12);
    }

    #[test]
    fn ranked_candidate_lists_satisfy_invariants(seed in 0u64..1000, n in 3usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = nalgebra::DMatrix::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let scores = (&raw + raw.transpose()) / 2.0;
        let m = 1 + (seed as usize) % (n - 1);
        let sets = tspflow::candidates::rank_by_score(
            &scores,
            m,
            tspflow::candidates::CandidateSource::PNearness,
            None,
        ).unwrap();
        for (city, list) in sets.lists().iter().enumerate() {
            prop_assert_eq!(list.len(), m);
            let mut seen = std::collections::HashSet::new();
            for c in list {
                prop_assert!(c.city != city);
                prop_assert!(seen.insert(c.city));
            }
            for w in list.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
        }
    }
}
