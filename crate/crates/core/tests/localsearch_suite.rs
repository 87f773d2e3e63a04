//! Local-search behavior beyond the unit tests: the 3-opt rescue case,
//! determinism of full runs, and stats serialization.

mod common;

use common::*;
use tspflow::candidates::distance_candidates;
use tspflow::harness::build_nearness_sets;
use tspflow::instance::*;
use tspflow::localsearch::*;

#[test]
fn three_opt_rescues_a_two_opt_local_optimum() {
    // Screen seeded n=7 instances for a tour that 2-opt cannot improve but
    // 3-opt can; the screen itself is deterministic.
    let mut found = 0;
    'outer: for seed in 0..300u64 {
        let d = random_matrix(7, 10_000 + seed);
        let cands = distance_candidates(&d, 6).unwrap();
        let best = brute_force_optimum(&d).unwrap().cached_cost().unwrap();
        for tour_seed in 0..4u64 {
            let mut rng = rand::SeedableRng::seed_from_u64(tour_seed);
            let mut tour = shuffled_tour(7, &mut rng);
            while let Some(next) = two_opt_step(&d, &tour, &cands).unwrap() {
                tour = next;
            }
            let stuck_cost = tour_cost(&d, &tour).unwrap();
            if stuck_cost > best + 1e-9 {
                // 2-opt locally optimal but not globally optimal.
                let improved = three_opt_step(&d, &tour, &cands)
                    .unwrap()
                    .expect("a pure 3-opt move must exist at this point or the screen instance is discarded");
                assert!(tour_cost(&d, &improved).unwrap() < stuck_cost - 1e-10);
                found += 1;
                if found >= 3 {
                    break 'outer;
                }
            }
        }
    }
    assert!(found >= 1, "screen found no 2-opt-stuck instance");
}

#[test]
fn full_search_is_deterministic() {
    let d = random_matrix(30, 5);
    let sets = build_nearness_sets(&d, 5).unwrap();
    for cands in [&sets.alpha, &sets.p] {
        let config = SearchConfig::budgeted(30, 12);
        let t0 = initial_tour(&d, cands, 12).unwrap();
        let a = k_opt_search(&d, &t0, cands, &config).unwrap();
        let b = k_opt_search(&d, &t0, cands, &config).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn stats_serialize_csv_and_json() {
    let d = random_matrix(15, 9);
    let cands = distance_candidates(&d, 4).unwrap();
    let config = SearchConfig::budgeted(15, 3);
    let t0 = initial_tour(&d, &cands, 3).unwrap();
    let stats = k_opt_search(&d, &t0, &cands, &config).unwrap();

    let csv = stats.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("move_index,cost"));
    assert_eq!(csv.lines().count(), stats.cost_by_move.len() + 1);

    let json = serde_json::to_string(&stats).unwrap();
    let back: SearchStats = serde_json::from_str(&json).unwrap();
    assert_eq!(back, stats);
}

#[test]
fn generous_budget_lands_near_optimum_on_small_instances() {
    // Regression guard: joint 2/3-opt local optima from candidate-built
    // tours sit within 5% of the exhaustive optimum on at least 90% of
    // seeded small instances.
    let mut good = 0;
    let total = 50u64;
    for seed in 0..total {
        let n = 7 + (seed % 3) as usize; // 7..=9
        let d = random_matrix(n, 20_000 + seed);
        let cands = build_nearness_sets(&d, 5).unwrap().alpha;
        let best = brute_force_optimum(&d).unwrap().cached_cost().unwrap();
        let start = initial_tour(&d, &cands, seed).unwrap();
        let config = SearchConfig {
            move_budget: None,
            max_k: 3,
            rng_seed: seed,
        };
        let stats = k_opt_search(&d, &start, &cands, &config).unwrap();
        let cost = tour_cost(&d, &stats.final_tour).unwrap();
        assert!(cost >= best - 1e-9);
        if cost <= 1.05 * best {
            good += 1;
        }
    }
    assert!(good * 10 >= total * 9, "within 5% on only {good}/{total} seeds");
}

#[test]
fn attempted_budget_is_respected_and_counts_failures() {
    let d = random_matrix(40, 77);
    let cands = distance_candidates(&d, 5).unwrap();
    let t0 = initial_tour(&d, &cands, 1).unwrap();
    for budget in [0u64, 10, 100, 320] {
        let config = SearchConfig {
            move_budget: Some(budget),
            max_k: 3,
            rng_seed: 1,
        };
        let stats = k_opt_search(&d, &t0, &cands, &config).unwrap();
        assert!(stats.attempted_moves <= budget);
        assert!(stats.accepted_moves <= stats.attempted_moves);
    }
}
