//! Closed-form orthogonal relaxation of the trace-form tour cost via the
//! two-sided orthogonal Procrustes problem, plus the candidate sets it
//! induces.
//!
//! For symmetric `D` and cycle matrix `T`, the orthogonal matrix minimizing
//! `tr(Dᵀ Pᵀ T P)` pairs the eigenvectors of `T` (ascending eigenvalues)
//! with those of `D` (descending). The relaxed tour matrix
//! `T* = Pᵀ T P = V_D Λ_T V_Dᵀ` depends only on the eigenvectors of `D` and
//! the sorted spectrum of `T`: the sign ambiguity `S = diag(±1)` of the
//! Procrustes solutions and the basis rotations within the degenerate
//! eigenspaces of `T` cancel out of `T*`, so candidate sets built from its
//! entries are deterministic given the eigensolver's sign convention.
//! Entry `t*_ij` acts as the strength of edge (i, j); candidate sets rank
//! neighbors by it, optionally after subtracting a scaled distance homotopy.

use log::warn;
use nalgebra::DMatrix;

use crate::candidates::{CandidateSets, CandidateSource};
use crate::error::{Error, Result};
use crate::instance::{permutation_from_tour, trace_cost, DistanceMatrix, Tour, TourMatrix};
use crate::linalg::{laplacian_components, sym_eig};

/// Solution of the relaxed tour problem.
#[derive(Debug, Clone)]
pub struct ProcrustesSolution {
    /// Orthogonal minimizer `P* = V_T V_Dᵀ` under opposite eigenvalue sorting.
    pub p_star: DMatrix<f64>,
    /// Relaxed tour matrix `P*ᵀ T P* = V_D Λ_T V_Dᵀ`.
    pub t_star: DMatrix<f64>,
    /// `tr(Dᵀ T*) = Σᵢ λ_D↓(i) λ_T↑(i)`, a lower bound on the trace cost of
    /// every permutation.
    pub relaxed_cost: f64,
}

/// Solve the orthogonal relaxation in closed form.
pub fn solve_procrustes(d: &DistanceMatrix, t: &TourMatrix) -> Result<ProcrustesSolution> {
    let n = d.n();
    if t.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "D is {n}x{n}, T is {m}x{m}",
            m = t.n()
        )));
    }
    let eig_d = sym_eig(d.matrix())?; // ascending
    let eig_t = sym_eig(t.matrix())?; // ascending

    // V_D with columns ordered by descending eigenvalue of D.
    let mut v_d_desc = DMatrix::zeros(n, n);
    let mut lambda_d_desc = Vec::with_capacity(n);
    for col in 0..n {
        let src = n - 1 - col;
        v_d_desc.set_column(col, &eig_d.eigenvectors.column(src));
        lambda_d_desc.push(eig_d.eigenvalues[src]);
    }

    let p_star = &eig_t.eigenvectors * v_d_desc.transpose();

    let mut t_star = DMatrix::zeros(n, n);
    for col in 0..n {
        let v = v_d_desc.column(col);
        let lt = eig_t.eigenvalues[col];
        for i in 0..n {
            for j in 0..n {
                t_star[(i, j)] += lt * v[i] * v[j];
            }
        }
    }

    let relaxed_cost: f64 = (0..n)
        .map(|i| lambda_d_desc[i] * eig_t.eigenvalues[i])
        .sum();

    Ok(ProcrustesSolution {
        p_star,
        t_star,
        relaxed_cost,
    })
}

/// P-nearness candidate sets: for each city the `m` neighbors with the
/// largest relaxed edge strengths `t*_ij`, ties to the smaller index.
pub fn p_nearness_candidates(t_star: &DMatrix<f64>, m: usize) -> Result<CandidateSets> {
    crate::candidates::rank_by_score(t_star, m, CandidateSource::PNearness, None)
}

/// Candidate sets from the homotopy `T* − λ D̂` at a fixed `λ`, where `D̂` is
/// `D` rescaled so its mean off-diagonal entry is 1/2. That is the natural
/// distance scale of a unit-square instance, for which λ = 1 mixes the
/// distances in dominantly; a Frobenius-matched copy turns out far too weak
/// for the ranking to respond on λ ∈ [0, 2].
pub fn candidates_at_lambda(
    t_star: &DMatrix<f64>,
    d: &DistanceMatrix,
    m: usize,
    lambda: f64,
) -> Result<CandidateSets> {
    if t_star.nrows() != d.n() {
        return Err(Error::DimensionMismatch(format!(
            "T* is {}x{}, D is {n}x{n}",
            t_star.nrows(),
            t_star.ncols(),
            n = d.n()
        )));
    }
    let scores = t_star - scaled_distance(d) * lambda;
    crate::candidates::rank_by_score(&scores, m, CandidateSource::PNearness, Some(lambda))
}

fn scaled_distance(d: &DistanceMatrix) -> DMatrix<f64> {
    let n = d.n();
    let mean = d.matrix().sum() / (n * (n - 1)) as f64;
    if mean == 0.0 {
        return d.matrix().clone();
    }
    d.matrix() * (0.5 / mean)
}

/// Largest homotopy weight probed.
pub const LAMBDA_MAX: f64 = 2.0;
/// Bisection tolerance on λ.
pub const LAMBDA_TOL: f64 = 1e-3;
/// Grid used both for the monotonicity sanity check and to bracket the
/// connectivity boundary.
const LAMBDA_GRID: usize = 20;

/// Homotopy candidate sets.
///
/// Scans the candidate-graph connectivity of `T* − λ D̂` on a 20-point grid
/// over `[0, 2]`. If the graph stays connected everywhere, λ = 1 is used.
/// Otherwise the largest connected λ is located by bisection (to 1e-3); when
/// the grid shows non-monotone connectivity the bisection premise fails and
/// a fine λ-march is used instead. Connectivity is judged on the symmetrized
/// candidate graph via the Laplacian zero-eigenvalue count.
pub fn homotopy_candidates(
    t_star: &DMatrix<f64>,
    d: &DistanceMatrix,
    m: usize,
) -> Result<CandidateSets> {
    // Validates m and dimensions up front.
    let at_zero = candidates_at_lambda(t_star, d, m, 0.0)?;

    let connected = |lambda: f64| -> Result<bool> {
        let sets = if lambda == 0.0 {
            at_zero.clone()
        } else {
            candidates_at_lambda(t_star, d, m, lambda)?
        };
        Ok(laplacian_components(&sets.symmetric_adjacency())? == 1)
    };

    let grid: Vec<f64> = (0..LAMBDA_GRID)
        .map(|i| LAMBDA_MAX * i as f64 / (LAMBDA_GRID - 1) as f64)
        .collect();
    let mut flags = Vec::with_capacity(LAMBDA_GRID);
    for &l in &grid {
        flags.push(connected(l)?);
    }

    if flags.iter().all(|&c| c) {
        // Distance never disconnects the graph on [0, λ_max]; fall back to
        // λ = 1.
        return candidates_at_lambda(t_star, d, m, 1.0);
    }
    if !flags[0] {
        warn!("candidate graph disconnected already at λ = 0; keeping λ = 0");
        return Ok(at_zero);
    }

    let monotone = {
        let first_false = flags.iter().position(|&c| !c).unwrap();
        flags[first_false..].iter().all(|&c| !c)
    };

    let lambda_star = if monotone {
        let first_false = flags.iter().position(|&c| !c).unwrap();
        let mut lo = grid[first_false - 1]; // connected
        let mut hi = grid[first_false]; // disconnected
        while hi - lo > LAMBDA_TOL {
            let mid = 0.5 * (lo + hi);
            if connected(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    } else {
        warn!("connectivity not monotone in λ; marching instead of bisecting");
        let mut last_connected = 0.0;
        let mut l = LAMBDA_TOL;
        while l <= LAMBDA_MAX {
            if !connected(l)? {
                break;
            }
            last_connected = l;
            l += LAMBDA_TOL;
        }
        last_connected
    };

    candidates_at_lambda(t_star, d, m, lambda_star)
}

/// Gap between a tour's trace cost and the relaxed optimum; also verifies
/// the algebraic identity
/// `‖D − PᵀTP‖² = ‖D‖² − 2 tr(DᵀPᵀTP) + ‖T‖²` at the tour's permutation.
pub fn relaxation_gap(d: &DistanceMatrix, t: &TourMatrix, tour: &Tour) -> Result<f64> {
    let n = d.n();
    if t.n() != n || tour.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "gap with D {n}x{n}, T {}x{}, tour over {}",
            t.n(),
            t.n(),
            tour.n()
        )));
    }
    let p = permutation_from_tour(tour);
    let tc = trace_cost(d, t, &p)?;

    let conjugated = p.transpose() * t.matrix() * &p;
    let lhs = (d.matrix() - &conjugated).norm_squared();
    let rhs = d.matrix().norm_squared() - 2.0 * tc + t.matrix().norm_squared();
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    if (lhs - rhs).abs() > 1e-8 * scale {
        return Err(Error::NumericalFailure(format!(
            "norm/trace identity violated: {lhs} vs {rhs}"
        )));
    }

    let sol = solve_procrustes(d, t)?;
    Ok(tc - sol.relaxed_cost)
}
