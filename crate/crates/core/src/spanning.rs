//! Minimum 1-trees, α-nearness, and Held–Karp subgradient optimization.
//!
//! A 1-tree is a spanning tree over all vertices except a special vertex
//! `v₁` plus the two cheapest edges at `v₁`; its weight lower-bounds every
//! tour. α(i,j) measures how much the minimum 1-tree grows when forced to
//! contain edge (i,j), and the π-penalties of the subgradient method push
//! 1-tree degrees toward 2, tightening both the bound and the α-ranking.

use nalgebra::DMatrix;

use crate::candidates::{Candidate, CandidateSets, CandidateSource};
use crate::error::{Error, Result};
use crate::instance::DistanceMatrix;

/// Default special vertex for 1-trees; fixed for determinism.
pub const DEFAULT_SPECIAL_VERTEX: usize = 0;

/// A 1-tree: `n` edges, spanning tree away from the special vertex plus two
/// edges at it.
#[derive(Debug, Clone, PartialEq)]
pub struct OneTree {
    /// All `n` edges, endpoints normalized so `e.0 < e.1`.
    pub edges: Vec<(usize, usize)>,
    pub weight: f64,
    pub degrees: Vec<usize>,
    pub special_vertex: usize,
}

impl OneTree {
    /// True when every vertex has degree 2, i.e. the 1-tree is a tour.
    pub fn is_tour(&self) -> bool {
        self.degrees.iter().all(|&d| d == 2)
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        let e = (i.min(j), i.max(j));
        self.edges.contains(&e)
    }
}

/// Prim's algorithm over the vertex set excluding `v1`.
///
/// Ties are broken deterministically: the next vertex is the smallest-index
/// vertex of minimum key, and among equal-weight connections the
/// lexicographically smaller edge wins. Returns vertices in insertion order
/// with their parents (first vertex has no parent).
fn prim_mst(w: &DMatrix<f64>, v1: usize) -> (Vec<usize>, Vec<Option<usize>>) {
    let n = w.nrows();
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    in_tree[v1] = true; // excluded from the spanning part

    let root = (0..n).find(|&v| v != v1).expect("n >= 2");
    key[root] = 0.0;
    let mut order = Vec::with_capacity(n - 1);
    for _ in 0..(n - 1) {
        let mut next = None;
        for v in 0..n {
            if !in_tree[v] && next.is_none_or(|b| key[v] < key[b]) {
                next = Some(v);
            }
        }
        let v = next.expect("vertex remains");
        in_tree[v] = true;
        order.push(v);
        for u in 0..n {
            if in_tree[u] || u == v {
                continue;
            }
            let duv = w[(v, u)];
            let better = duv < key[u]
                || (duv == key[u]
                    && parent[u].is_none_or(|p| edge_key(v, u) < edge_key(p, u)));
            if better {
                key[u] = duv;
                parent[u] = Some(v);
            }
        }
    }
    (order, parent)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Internals shared by [`minimum_1tree`] and the α computation. Operates on
/// a raw weight matrix so π-modified distances (possibly negative) work too.
struct OneTreeParts {
    tree: OneTree,
    prim_order: Vec<usize>,
    parent: Vec<Option<usize>>,
    /// Endpoints of the two cheapest edges at the special vertex.
    v1_neighbors: (usize, usize),
    /// Weight of the second-cheapest edge at the special vertex.
    v1_second_weight: f64,
}

fn minimum_1tree_raw(w: &DMatrix<f64>, v1: usize) -> Result<OneTreeParts> {
    let n = w.nrows();
    if n < 3 {
        return Err(Error::TooSmall(format!("1-tree needs n ≥ 3, got {n}")));
    }
    if v1 >= n {
        return Err(Error::InvalidParameter(format!("special vertex {v1}")));
    }
    let (order, parent) = prim_mst(w, v1);

    let mut edges = Vec::with_capacity(n);
    let mut degrees = vec![0usize; n];
    let mut weight = 0.0;
    for &v in &order {
        if let Some(p) = parent[v] {
            edges.push(edge_key(p, v));
            degrees[p] += 1;
            degrees[v] += 1;
            weight += w[(p, v)];
        }
    }

    // Two cheapest edges at v1, ties by neighbor index.
    let mut at_v1: Vec<usize> = (0..n).filter(|&j| j != v1).collect();
    at_v1.sort_by(|&a, &b| {
        w[(v1, a)]
            .partial_cmp(&w[(v1, b)])
            .expect("finite weight")
            .then(a.cmp(&b))
    });
    let (a, b) = (at_v1[0], at_v1[1]);
    for j in [a, b] {
        edges.push(edge_key(v1, j));
        degrees[v1] += 1;
        degrees[j] += 1;
        weight += w[(v1, j)];
    }

    Ok(OneTreeParts {
        tree: OneTree {
            edges,
            weight,
            degrees,
            special_vertex: v1,
        },
        prim_order: order,
        parent,
        v1_neighbors: (a, b),
        v1_second_weight: w[(v1, b)],
    })
}

/// Minimum 1-tree with special vertex `v1`.
pub fn minimum_1tree(d: &DistanceMatrix, v1: usize) -> Result<OneTree> {
    Ok(minimum_1tree_raw(d.matrix(), v1)?.tree)
}

fn alpha_values_raw(w: &DMatrix<f64>, v1: usize) -> Result<DMatrix<f64>> {
    let n = w.nrows();
    let parts = minimum_1tree_raw(w, v1)?;

    // β(i,j) = heaviest edge on the spanning-tree path between i and j,
    // filled in Prim insertion order: β(v,u) = max(β(parent(v),u), w(v,parent(v))).
    let mut beta: DMatrix<f64> = DMatrix::zeros(n, n);
    for (rank, &v) in parts.prim_order.iter().enumerate() {
        if let Some(p) = parts.parent[v] {
            let wv = w[(p, v)];
            for &u in &parts.prim_order[..rank] {
                let b = if u == p { wv } else { beta[(p, u)].max(wv) };
                beta[(v, u)] = b;
                beta[(u, v)] = b;
            }
        }
    }

    let mut alpha = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = if i == v1 || j == v1 {
                let other = if i == v1 { j } else { i };
                if other == parts.v1_neighbors.0 || other == parts.v1_neighbors.1 {
                    0.0
                } else {
                    w[(v1, other)] - parts.v1_second_weight
                }
            } else {
                w[(i, j)] - beta[(i, j)]
            };
            alpha[(i, j)] = a;
            alpha[(j, i)] = a;
        }
    }
    Ok(alpha)
}

/// α-nearness matrix: α(i,j) is the weight increase of the minimum 1-tree
/// when edge (i,j) is required. Zero on 1-tree edges, symmetric, computed in
/// O(n²) via in-tree maximum-edge values.
pub fn alpha_values(d: &DistanceMatrix, v1: usize) -> Result<DMatrix<f64>> {
    alpha_values_raw(d.matrix(), v1)
}

/// π-penalties with the lower bound they certify.
#[derive(Debug, Clone, PartialEq)]
pub struct PiVector {
    pub values: Vec<f64>,
    /// `w(min 1-tree under D̃(π)) − 2 Σπ`, a lower bound on the optimal tour.
    pub lower_bound: f64,
}

fn modified_matrix(d: &DistanceMatrix, pi: &[f64]) -> DMatrix<f64> {
    let n = d.n();
    // Mirrored explicitly: d + πᵢ + πⱼ evaluated in one order only, so the
    // matrix is bit-symmetric despite floating-point rounding.
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = d.get(i, j) + pi[i] + pi[j];
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
    }
    m
}

/// Held–Karp subgradient ascent on the 1-tree bound.
///
/// π moves along the degree surplus `deg(π) − 2`; the step starts at
/// `bound-scale / 2n`, halves after 10 non-improving iterations, and the
/// loop stops at `max_iters` or once the step underflows. Returns the best π
/// seen. When the very first 1-tree is already a tour the subgradient is
/// zero and π stays at 0.
pub fn subgradient_optimize(d: &DistanceMatrix, max_iters: usize) -> Result<PiVector> {
    subgradient_optimize_with(d, DEFAULT_SPECIAL_VERTEX, max_iters)
}

/// [`subgradient_optimize`] with an explicit special vertex.
pub fn subgradient_optimize_with(
    d: &DistanceMatrix,
    v1: usize,
    max_iters: usize,
) -> Result<PiVector> {
    let n = d.n();
    let mut pi = vec![0.0; n];
    let first = minimum_1tree(d, v1)?;
    let t0 = first.weight.abs().max(1.0) / (2.0 * n as f64);
    let mut t = t0;

    let mut best = PiVector {
        values: pi.clone(),
        lower_bound: first.weight,
    };
    if first.is_tour() {
        return Ok(best);
    }

    let mut non_improving = 0usize;
    for _ in 0..max_iters {
        let w = modified_matrix(d, &pi);
        let parts = minimum_1tree_raw(&w, v1)?;
        let bound = parts.tree.weight - 2.0 * pi.iter().sum::<f64>();
        if bound > best.lower_bound + 1e-12 * best.lower_bound.abs().max(1.0) {
            best = PiVector {
                values: pi.clone(),
                lower_bound: bound,
            };
            non_improving = 0;
        } else {
            non_improving += 1;
            if non_improving >= 10 {
                t /= 2.0;
                non_improving = 0;
            }
        }
        if parts.tree.is_tour() {
            break;
        }
        for (p, &deg) in pi.iter_mut().zip(&parts.tree.degrees) {
            *p += t * (deg as f64 - 2.0);
        }
        if t < 1e-6 * t0 {
            break;
        }
    }
    Ok(best)
}

/// α-nearness candidate sets: subgradient-optimized π, α on the modified
/// matrix, then per city the `m` neighbors of lowest α (ties by modified
/// distance, then index). Stored scores are negated α values.
pub fn alpha_candidates(d: &DistanceMatrix, m: usize) -> Result<CandidateSets> {
    let n = d.n();
    if m < 1 || m > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "m = {m} out of range 1..={}",
            n - 1
        )));
    }
    let pi = subgradient_optimize(d, 50 + n)?;
    let w = modified_matrix(d, &pi.values);
    let alpha = alpha_values_raw(&w, DEFAULT_SPECIAL_VERTEX)?;

    let mut lists = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        row.sort_by(|&a, &b| {
            alpha[(i, a)]
                .partial_cmp(&alpha[(i, b)])
                .expect("finite alpha")
                .then(w[(i, a)].partial_cmp(&w[(i, b)]).expect("finite distance"))
                .then(a.cmp(&b))
        });
        row.truncate(m);
        lists.push(
            row.into_iter()
                .map(|j| Candidate {
                    city: j,
                    score: -alpha[(i, j)],
                })
                .collect(),
        );
    }
    CandidateSets::new(lists, CandidateSource::AlphaNearness, None)
}
