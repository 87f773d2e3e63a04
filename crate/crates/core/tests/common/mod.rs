//! Shared oracles and fixtures for the integration suites. Everything here
//! is deliberately brute-force and independent of the library's algorithms.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tspflow::instance::{build_distance_matrix, DistanceMatrix, Instance, Rounding, Tour};

pub fn triangle_345() -> DistanceMatrix {
    let m = DMatrix::from_row_slice(3, 3, &[0.0, 3.0, 4.0, 3.0, 0.0, 5.0, 4.0, 5.0, 0.0]);
    DistanceMatrix::new(m).unwrap()
}

/// Jittered ring of `n` cities, optionally with two positions swapped so the
/// index order is no longer the optimal tour.
pub fn ring_instance(n: usize, jitter: f64, seed: u64, swap: Option<(usize, usize)>) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let r = 1.0 + jitter * (rng.gen::<f64>() - 0.5);
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    if let Some((i, j)) = swap {
        pts.swap(i, j);
    }
    Instance::from_coords("ring", pts, Rounding::Exact).unwrap()
}

pub fn random_matrix(n: usize, seed: u64) -> DistanceMatrix {
    build_distance_matrix(&tspflow::instance::random_instance(n, seed)).unwrap()
}

/// Call `f` on every permutation of `0..n` (first element free).
pub fn for_each_permutation(n: usize, f: &mut impl FnMut(&[usize])) {
    fn heap(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k <= 1 {
            f(items);
            return;
        }
        for i in 0..k {
            heap(items, k - 1, f);
            if k.is_multiple_of(2) {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    let mut items: Vec<usize> = (0..n).collect();
    heap(&mut items, n, f);
}

/// All edges of the complete graph on vertices != v1.
fn core_edges(n: usize, v1: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if i != v1 && j != v1 {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn is_spanning_tree(n: usize, v1: usize, chosen: &[(usize, usize)]) -> bool {
    // n-2 edges over the n-1 vertices excluding v1, connected and acyclic.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let r = find(parent, parent[x]);
            parent[x] = r;
        }
        parent[x]
    }
    for &(a, b) in chosen {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    let mut root = None;
    for v in 0..n {
        if v == v1 {
            continue;
        }
        let r = find(&mut parent, v);
        match root {
            None => root = Some(r),
            Some(r0) if r0 != r => return false,
            _ => {}
        }
    }
    true
}

/// Exhaustive minimum 1-tree weight, optionally constrained to contain a
/// required edge. Enumerates every spanning tree over V∖{v1} and every pair
/// of edges at v1.
pub fn brute_force_one_tree(
    d: &DistanceMatrix,
    v1: usize,
    required: Option<(usize, usize)>,
) -> f64 {
    let n = d.n();
    let edges = core_edges(n, v1);
    let k = n - 2;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);

    // v1 edge pairs, possibly forced to include a required v1 edge.
    let mut v1_pairs: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if a == v1 || b == v1 {
                continue;
            }
            v1_pairs.push((a, b, d.get(v1, a) + d.get(v1, b)));
        }
    }
    let required_v1 = match required {
        Some((x, y)) if x == v1 || y == v1 => Some(if x == v1 { y } else { x }),
        _ => None,
    };
    let required_core = match required {
        Some((x, y)) if x != v1 && y != v1 => Some((x.min(y), x.max(y))),
        _ => None,
    };
    let v1_best: Vec<(usize, usize, f64)> = match required_v1 {
        Some(j) => v1_pairs
            .iter()
            .filter(|&&(a, b, _)| a == j || b == j)
            .cloned()
            .collect(),
        None => v1_pairs,
    };

    #[allow(clippy::too_many_arguments)]
    fn rec(
        edges: &[(usize, usize)],
        start: usize,
        chosen: &mut Vec<(usize, usize)>,
        k: usize,
        n: usize,
        v1: usize,
        d: &DistanceMatrix,
        required_core: Option<(usize, usize)>,
        v1_best: &[(usize, usize, f64)],
        best: &mut f64,
    ) {
        if chosen.len() == k {
            if let Some(req) = required_core {
                if !chosen.contains(&req) {
                    return;
                }
            }
            if !is_spanning_tree(n, v1, chosen) {
                return;
            }
            let tree_w: f64 = chosen.iter().map(|&(a, b)| d.get(a, b)).sum();
            let pair_w = v1_best
                .iter()
                .map(|&(_, _, w)| w)
                .fold(f64::INFINITY, f64::min);
            if tree_w + pair_w < *best {
                *best = tree_w + pair_w;
            }
            return;
        }
        if start >= edges.len() || edges.len() - start < k - chosen.len() {
            return;
        }
        chosen.push(edges[start]);
        rec(edges, start + 1, chosen, k, n, v1, d, required_core, v1_best, best);
        chosen.pop();
        rec(edges, start + 1, chosen, k, n, v1, d, required_core, v1_best, best);
    }
    rec(
        &edges,
        0,
        &mut chosen,
        k,
        n,
        v1,
        d,
        required_core,
        &v1_best,
        &mut best,
    );
    best
}

/// Central finite difference of a scalar matrix function along direction Z.
pub fn central_difference(
    f: &dyn Fn(&DMatrix<f64>) -> f64,
    p: &DMatrix<f64>,
    z: &DMatrix<f64>,
    eps: f64,
) -> f64 {
    (f(&(p + z * eps)) - f(&(p - z * eps))) / (2.0 * eps)
}

pub fn random_skew(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&g - g.transpose()) / 2.0
}

pub fn shuffled_tour(n: usize, rng: &mut ChaCha8Rng) -> Tour {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    Tour::new(order).unwrap()
}
