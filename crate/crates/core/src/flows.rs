//! Gradient flows for the relaxed tour problem: the P-flow on the
//! orthogonal manifold, its Lagrangian variant, and the isospectral H-flow
//! on the orbit of the cycle matrix.
//!
//! Both flows minimize `(1−k)·cost + k·penalty`, where the penalty drives
//! the iterate toward a permutation (P-flow, cubic penalty) or toward 0/1
//! entries (H-flow). `k` ramps from 0 to 0.99 after each stage settles.
//! Steps use the Cayley transform of the skew generator, which keeps `P`
//! orthogonal and `H` isospectral to machine precision regardless of the
//! step size; the step size itself adapts by halving on objective increase
//! and growing 20% after five straight accepts.
//!
//! Gradients follow the canonical-metric convention on the orthogonal
//! group: for a tangent direction `Z`, `⟨grad, Z⟩ = 2·dF[Z]`. The flow
//! dynamics run on `D/‖D‖_F` so the fixed `k` schedule balances cost
//! against penalty identically across instances; reported costs are in the
//! original distance units.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{tour_from_permutation, DistanceMatrix, Tour, TourMatrix};
use crate::linalg::{cayley_factor, cayley_step, gen_lie_bracket, lie_bracket, ones, orthogonality_residual};

/// Tunables of a flow run. Convergence thresholds are part of the reported
/// contract; the step plumbing is not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Initial step size relative to the Frobenius-normalized distances.
    pub step0: f64,
    /// Homotopy weights visited after the k = 0 stage.
    pub k_schedule: Vec<f64>,
    /// Gradient norm at which a non-final stage counts as settled.
    pub stage_grad_tol: f64,
    /// Gradient norm required for convergence at the final stage.
    pub final_grad_tol: f64,
    /// Smallest per-row maximum entry required of a converged P.
    pub row_max_threshold: f64,
    /// Penalty residual required of a converged constrained run; the
    /// Lagrangian variant enforces the penalty as an equality constraint,
    /// so its converged states must satisfy it tightly.
    pub penalty_tol: f64,
    pub max_stage_steps: u64,
    /// Independent restarts for the multi-start drivers.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            step0: 0.1,
            // The 0.99 stage alone leaves rows at ~0.986; the two extra
            // stages sharpen the equilibrium enough for the row gate.
            k_schedule: vec![
                0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99, 0.999, 0.9999,
            ],
            stage_grad_tol: 1e-4,
            final_grad_tol: 1e-6,
            row_max_threshold: 0.999,
            penalty_tol: 1e-6,
            max_stage_steps: 3000,
            restarts: 5,
            seed: 0,
        }
    }
}

/// State of the orthogonal-manifold flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PFlowState {
    pub p: DMatrix<f64>,
    pub k: f64,
    pub step_size: f64,
    pub step_count: u64,
}

/// State of the isospectral flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HFlowState {
    pub matrix: DMatrix<f64>,
    pub k: f64,
    pub step_size: f64,
    pub step_count: u64,
    /// Spectrum of the starting tour matrix; preserved by construction.
    pub reference_spectrum: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FlowFinalState {
    P(PFlowState),
    Constrained { state: PFlowState, multiplier: f64 },
    H(HFlowState),
}

/// Outcome of one flow run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowReport {
    pub converged: bool,
    /// Present only when the run converged to a valid tour.
    pub rounded_tour: Option<Tour>,
    /// (step, trace cost in original units) at the start and after every
    /// accepted step.
    pub cost_trace: Vec<(u64, f64)>,
    pub final_gradient_norm: f64,
    pub final_state: FlowFinalState,
}

impl FlowReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// Gradient of `F(P) = tr(Aᵀ Pᵀ B P)` on the orthogonal manifold:
/// `P({PᵀBP, A} + {PᵀBᵀP, Aᵀ})`.
pub fn grad_f_p(p: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let same = |m: &DMatrix<f64>| m.nrows() == p.nrows() && m.ncols() == p.ncols();
    if p.nrows() != p.ncols() || !same(a) || !same(b) {
        return Err(Error::DimensionMismatch("grad_f_p operands".to_string()));
    }
    let pbp = p.transpose() * b * p;
    let pbtp = p.transpose() * b.transpose() * p;
    let s = gen_lie_bracket(&pbp, a)? + gen_lie_bracket(&pbtp, &a.transpose())?;
    Ok(p * s)
}

/// Gradient of the cubic permutation penalty
/// `G(P) = ⅓ tr(Pᵀ(P − P∘P))`: returns `P((P∘P)ᵀP − Pᵀ(P∘P))`.
/// Vanishes at every permutation matrix.
pub fn grad_g_p(p: &DMatrix<f64>) -> DMatrix<f64> {
    let sq = p.component_mul(p);
    p * (sq.transpose() * p - p.transpose() * &sq)
}

/// Penalty value `G(P) = ⅓ (tr(PᵀP) − Σ p³)`.
pub fn penalty_value(p: &DMatrix<f64>) -> f64 {
    let cubes: f64 = p.iter().map(|x| x * x * x).sum();
    (p.norm_squared() - cubes) / 3.0
}

/// Euclidean derivative of the combined objective
/// `(1−k)·tr(AᵀPᵀBP) + k·G(P)`.
fn combined_derivative(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: f64,
) -> DMatrix<f64> {
    let cost = b * p * a.transpose() + b.transpose() * p * a;
    let pen = -p.component_mul(p);
    cost * (1.0 - k) + pen * k
}

/// Skew generator `M = F_P Pᵀ − P F_Pᵀ` of the combined objective; the flow
/// step is the Cayley transform of `M`, and `‖M‖_F` equals the gradient
/// norm for orthogonal `P`.
pub fn p_flow_skew(p: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, k: f64) -> DMatrix<f64> {
    let fp = combined_derivative(p, a, b, k);
    &fp * p.transpose() - p * fp.transpose()
}

fn lagrangian_derivative(p: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let cost = b * p * a.transpose() + b.transpose() * p * a;
    let pen = -p.component_mul(p);
    cost + pen * lambda
}

fn trace_value(a: &DMatrix<f64>, b: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    (a.transpose() * p.transpose() * b * p).trace()
}

/// Smallest per-row maximum entry magnitude. A row is decided once a single
/// entry dominates it; the cubic penalty's stationary set includes signed
/// permutations, so dominance is judged in absolute value and the
/// assignment rounding recovers the underlying pattern.
fn min_row_max(p: &DMatrix<f64>) -> f64 {
    (0..p.nrows())
        .map(|i| {
            p.row(i)
                .iter()
                .map(|x| x.abs())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// P-flow integration
// ---------------------------------------------------------------------------

struct PIntegrator<'c> {
    a: DMatrix<f64>, // normalized distances
    b: DMatrix<f64>,
    d_norm: f64,
    config: &'c FlowConfig,
    trace: Vec<(u64, f64)>,
    steps: u64,
}

impl<'c> PIntegrator<'c> {
    fn record(&mut self, p: &DMatrix<f64>, t_actual: &DMatrix<f64>) {
        let conjugated = p.transpose() * t_actual * p;
        let cost = (self.a.transpose() * conjugated).trace() * self.d_norm;
        self.trace.push((self.steps, cost));
    }

    /// Run one k-stage. Returns (gradient norm, stalled).
    fn run_stage(
        &mut self,
        p: &mut DMatrix<f64>,
        h: &mut f64,
        k: f64,
        tol: f64,
        final_stage: bool,
    ) -> (f64, bool) {
        let t = self.b.clone();
        let mut phi =
            (1.0 - k) * trace_value(&self.a, &self.b, p) + k * penalty_value(p);
        let mut accepts_in_row = 0u32;
        let mut grad_norm = f64::INFINITY;
        for _ in 0..self.config.max_stage_steps {
            let m = p_flow_skew(p, &self.a, &self.b, k);
            grad_norm = m.norm();
            if grad_norm <= tol {
                return (grad_norm, false);
            }
            if final_stage
                && grad_norm <= self.config.final_grad_tol
                && min_row_max(p) >= self.config.row_max_threshold
            {
                return (grad_norm, false);
            }
            // One accept/reject cycle; a singular Cayley system counts as
            // a rejection.
            loop {
                if let Ok(cand) = cayley_step(p, &m, *h) {
                    let phi_new = (1.0 - k) * trace_value(&self.a, &self.b, &cand)
                        + k * penalty_value(&cand);
                    if phi_new <= phi + 1e-12 * phi.abs().max(1.0) {
                        *p = cand;
                        phi = phi_new;
                        self.steps += 1;
                        self.record(p, &t);
                        accepts_in_row += 1;
                        if accepts_in_row >= 5 {
                            *h *= 1.2;
                            accepts_in_row = 0;
                        }
                        break;
                    }
                }
                *h /= 2.0;
                accepts_in_row = 0;
                if *h < 1e-13 * self.config.step0 {
                    return (grad_norm, true);
                }
            }
            if orthogonality_residual(p) > 1e-6 * p.nrows() as f64 {
                reorthonormalize(p);
            }
        }
        (grad_norm, false)
    }
}

fn reorthonormalize(p: &mut DMatrix<f64>) {
    let qr = p.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    // Keep Q close to P by absorbing the signs of R's diagonal.
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    *p = q;
}

fn normalized_distances(d: &DistanceMatrix) -> (DMatrix<f64>, f64) {
    let norm = d.matrix().norm();
    if norm == 0.0 {
        (d.matrix().clone(), 1.0)
    } else {
        (d.matrix() / norm, norm)
    }
}

/// Integrate the superimposed cost/penalty flow from `p0`, ramping `k`
/// through the configured schedule after the k = 0 stage settles. A
/// converged run ends at a near-permutation (gradient below
/// `final_grad_tol`, every row dominated by one entry) and reports the
/// rounded tour; step-size underflow or stage exhaustion reports
/// `converged = false` with the best state reached.
pub fn integrate_p_flow(
    d: &DistanceMatrix,
    t: &TourMatrix,
    p0: &DMatrix<f64>,
    config: &FlowConfig,
) -> Result<FlowReport> {
    let n = d.n();
    if t.n() != n || p0.nrows() != n || p0.ncols() != n {
        return Err(Error::DimensionMismatch("integrate_p_flow operands".to_string()));
    }
    let (a, d_norm) = normalized_distances(d);
    let mut integ = PIntegrator {
        a,
        b: t.matrix().clone(),
        d_norm,
        config,
        trace: Vec::new(),
        steps: 0,
    };
    let mut p = p0.clone();
    let mut h = config.step0;
    let t_actual = t.matrix().clone();
    integ.record(&p, &t_actual);

    let mut stages = vec![0.0];
    stages.extend_from_slice(&config.k_schedule);
    let last = stages.len() - 1;

    let mut grad_norm = f64::INFINITY;
    let mut stalled = false;
    let mut final_k = 0.0;
    for (idx, &k) in stages.iter().enumerate() {
        final_k = k;
        let is_final = idx == last;
        let tol = if is_final {
            config.final_grad_tol
        } else {
            config.stage_grad_tol
        };
        let (g, st) = integ.run_stage(&mut p, &mut h, k, tol, is_final);
        grad_norm = g;
        if st {
            stalled = true;
            break;
        }
    }

    let converged = !stalled
        && grad_norm <= config.final_grad_tol
        && min_row_max(&p) >= config.row_max_threshold;
    let rounded_tour = if converged {
        let perm = round_to_permutation(&p);
        let tour = tour_from_permutation(&perm)?;
        let cost = crate::instance::tour_cost(d, &tour)?;
        Some(tour.with_cost(cost))
    } else {
        None
    };

    Ok(FlowReport {
        converged,
        rounded_tour,
        cost_trace: integ.trace,
        final_gradient_norm: grad_norm,
        final_state: FlowFinalState::P(PFlowState {
            p,
            k: final_k,
            step_size: h,
            step_count: integ.steps,
        }),
    })
}

/// Integrate the coupled Lagrangian system: gradient descent in `P` for
/// `F + λG`, gradient ascent `λ̇ = G(P)` in the multiplier. Steps are
/// accepted when they do not increase `F + λG` at the updated multiplier.
pub fn integrate_p_flow_constrained(
    d: &DistanceMatrix,
    t: &TourMatrix,
    p0: &DMatrix<f64>,
    lambda0: f64,
    config: &FlowConfig,
) -> Result<FlowReport> {
    let n = d.n();
    if t.n() != n || p0.nrows() != n || p0.ncols() != n {
        return Err(Error::DimensionMismatch(
            "integrate_p_flow_constrained operands".to_string(),
        ));
    }
    let (a, d_norm) = normalized_distances(d);
    let b = t.matrix().clone();
    let mut p = p0.clone();
    let mut lambda = lambda0;
    let mut h = config.step0;
    let mut steps = 0u64;
    let mut trace = Vec::new();
    let record = |p: &DMatrix<f64>, steps: u64, trace: &mut Vec<(u64, f64)>| {
        trace.push((steps, trace_value(&a, &b, p) * d_norm));
    };
    record(&p, steps, &mut trace);

    let total_steps = config.max_stage_steps * (config.k_schedule.len() as u64 + 1);
    let mut grad_norm = f64::INFINITY;
    let mut stalled = false;
    for _ in 0..total_steps {
        let fp = lagrangian_derivative(&p, &a, &b, lambda);
        let m = &fp * p.transpose() - &p * fp.transpose();
        grad_norm = m.norm();
        if grad_norm <= config.final_grad_tol
            && min_row_max(&p) >= config.row_max_threshold
            && penalty_value(&p) <= config.penalty_tol
        {
            break;
        }
        loop {
            if let Ok(cand) = cayley_step(&p, &m, h) {
                let lambda_new = lambda + h * penalty_value(&cand);
                let merit_old = trace_value(&a, &b, &p) + lambda_new * penalty_value(&p);
                let merit_new =
                    trace_value(&a, &b, &cand) + lambda_new * penalty_value(&cand);
                if merit_new <= merit_old + 1e-12 * merit_old.abs().max(1.0) {
                    p = cand;
                    lambda = lambda_new;
                    steps += 1;
                    record(&p, steps, &mut trace);
                    break;
                }
            }
            h /= 2.0;
            if h < 1e-13 * config.step0 {
                stalled = true;
                break;
            }
        }
        if stalled {
            break;
        }
        if steps.is_multiple_of(5) {
            h *= 1.2;
        }
        if orthogonality_residual(&p) > 1e-6 * n as f64 {
            reorthonormalize(&mut p);
        }
    }

    let converged = !stalled
        && grad_norm <= config.final_grad_tol
        && min_row_max(&p) >= config.row_max_threshold
        && penalty_value(&p) <= config.penalty_tol;
    let rounded_tour = if converged {
        let perm = round_to_permutation(&p);
        let tour = tour_from_permutation(&perm)?;
        let cost = crate::instance::tour_cost(d, &tour)?;
        Some(tour.with_cost(cost))
    } else {
        None
    };
    Ok(FlowReport {
        converged,
        rounded_tour,
        cost_trace: trace,
        final_gradient_norm: grad_norm,
        final_state: FlowFinalState::Constrained {
            state: PFlowState {
                p,
                k: 0.0,
                step_size: h,
                step_count: steps,
            },
            multiplier: lambda,
        },
    })
}

// ---------------------------------------------------------------------------
// H-flow
// ---------------------------------------------------------------------------

/// Derivative of the 0/1 penalty `‖H − H∘H‖_F²`:
/// `G_H = 2 (H − H∘H) ∘ (E − 2H)`. Zero wherever entries are exactly 0 or 1.
pub fn h_flow_penalty_derivative(h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let hh = h - h.component_mul(h);
    let e2 = ones(n) - h * 2.0;
    hh.component_mul(&e2) * 2.0
}

/// Skew generator `N = {H, F̃} + {Hᵀ, F̃ᵀ}` of the combined objective with
/// `F̃ = (1−k)A + k·G_H`.
pub fn h_flow_generator(h: &DMatrix<f64>, a: &DMatrix<f64>, k: f64) -> Result<DMatrix<f64>> {
    let fh = a * (1.0 - k) + h_flow_penalty_derivative(h) * k;
    Ok(gen_lie_bracket(h, &fh)? + gen_lie_bracket(&h.transpose(), &fh.transpose())?)
}

/// Right-hand side of the isospectral flow:
/// `−(1−k)[H, {H,A}+{Hᵀ,Aᵀ}] − k[H, {H,G_H}+{Hᵀ,G_Hᵀ}]`.
pub fn h_flow_rhs(h: &DMatrix<f64>, a: &DMatrix<f64>, k: f64) -> Result<DMatrix<f64>> {
    if h.nrows() != h.ncols() || h.shape() != a.shape() {
        return Err(Error::DimensionMismatch("h_flow_rhs operands".to_string()));
    }
    let n = h_flow_generator(h, a, k)?;
    Ok(-lie_bracket(h, &n)?)
}

/// Structure-preserving update `H ← Rᵀ H R` with
/// `R = (I + s/2·N)⁻¹(I − s/2·N)`; similarity keeps the spectrum exactly.
pub fn h_flow_cayley_update(h: &DMatrix<f64>, n: &DMatrix<f64>, step: f64) -> Result<DMatrix<f64>> {
    let r = cayley_factor(n, step)?;
    Ok(r.transpose() * h * r)
}

fn h_objective(h: &DMatrix<f64>, a: &DMatrix<f64>, k: f64) -> f64 {
    let pen = (h - h.component_mul(h)).norm_squared();
    (1.0 - k) * (a.transpose() * h).trace() + k * pen
}

/// Threshold at 0.5 and validate the single-cycle invariants.
pub fn extract_tour_from_h(h: &DMatrix<f64>) -> Result<Tour> {
    let n = h.nrows();
    let adj = DMatrix::from_fn(n, n, |i, j| {
        if i != j && h[(i, j)] >= 0.5 {
            1.0
        } else {
            0.0
        }
    });
    TourMatrix::from_adjacency(adj)?.extract_tour()
}

/// Integrate the H-flow from `H₀ = T`, ramping `k` like the P-flow. The
/// final matrix is thresholded at 0.5; a run converges only if that yields
/// a valid single cycle.
pub fn integrate_h_flow(
    d: &DistanceMatrix,
    t: &TourMatrix,
    config: &FlowConfig,
) -> Result<FlowReport> {
    let n = d.n();
    if t.n() != n {
        return Err(Error::DimensionMismatch("integrate_h_flow operands".to_string()));
    }
    let (a, d_norm) = normalized_distances(d);
    let reference_spectrum: Vec<f64> = {
        let eig = crate::linalg::sym_eig(t.matrix())?;
        eig.eigenvalues.iter().cloned().collect()
    };
    let mut hm = t.matrix().clone();
    let mut step = config.step0;
    let mut steps = 0u64;
    let mut trace = vec![(0u64, (d.matrix().transpose() * &hm).trace())];

    let mut stages = vec![0.0];
    stages.extend_from_slice(&config.k_schedule);
    let last = stages.len() - 1;

    let mut grad_norm = f64::INFINITY;
    let mut stalled = false;
    let mut final_k = 0.0;
    'stages: for (idx, &k) in stages.iter().enumerate() {
        final_k = k;
        let tol = if idx == last {
            config.final_grad_tol
        } else {
            config.stage_grad_tol
        };
        let mut psi = h_objective(&hm, &a, k);
        let mut accepts_in_row = 0u32;
        for _ in 0..config.max_stage_steps {
            let gen = h_flow_generator(&hm, &a, k)?;
            grad_norm = lie_bracket(&hm, &gen)?.norm();
            if grad_norm <= tol {
                continue 'stages;
            }
            loop {
                if let Ok(cand) = h_flow_cayley_update(&hm, &gen, step) {
                    let psi_new = h_objective(&cand, &a, k);
                    if psi_new <= psi + 1e-12 * psi.abs().max(1.0) {
                        hm = cand;
                        psi = psi_new;
                        steps += 1;
                        trace.push((steps, (d.matrix().transpose() * &hm).trace()));
                        accepts_in_row += 1;
                        if accepts_in_row >= 5 {
                            step *= 1.2;
                            accepts_in_row = 0;
                        }
                        break;
                    }
                }
                step /= 2.0;
                accepts_in_row = 0;
                if step < 1e-13 * config.step0 {
                    stalled = true;
                    break 'stages;
                }
            }
        }
    }

    let extraction = if stalled { None } else { extract_tour_from_h(&hm).ok() };
    let converged = extraction.is_some();
    let rounded_tour = match extraction {
        Some(tour) => {
            let cost = crate::instance::tour_cost(d, &tour)?;
            Some(tour.with_cost(cost))
        }
        None => None,
    };
    let _ = d_norm;
    Ok(FlowReport {
        converged,
        rounded_tour,
        cost_trace: trace,
        final_gradient_norm: grad_norm,
        final_state: FlowFinalState::H(HFlowState {
            matrix: hm,
            k: final_k,
            step_size: step,
            step_count: steps,
            reference_spectrum,
        }),
    })
}

// ---------------------------------------------------------------------------
// Rounding and restarts
// ---------------------------------------------------------------------------

/// Nearest permutation matrix in the `Σ P_ij` sense: an exact linear
/// assignment maximizing the selected entries, ties resolved toward the
/// lowest-index column (shortest-augmenting-path scan order).
pub fn round_to_permutation(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    assert_eq!(n, p.ncols(), "square matrix required");
    // Min-cost assignment on cost = −p via shortest augmenting paths with
    // potentials (1-based arrays; column 0 is the virtual root).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = -p[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = DMatrix::zeros(n, n);
    for j in 1..=n {
        out[(row_of[j] - 1, j - 1)] = 1.0;
    }
    out
}

/// Random orthogonal matrix: the Cayley transform of a random skew matrix
/// (determinant +1), with the first two rows swapped when `flip_det` to
/// reach the other component.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng, flip_det: bool) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.5..1.5));
    let skew = (&g - g.transpose()) / 2.0;
    let mut q = cayley_factor(&skew, 2.0).expect("I + skew/1 is nonsingular");
    if flip_det {
        q.swap_rows(0, 1);
    }
    q
}

/// Multi-start P-flow: restart 0 begins at the identity (the trivial tour);
/// odd restarts at seeded random orthogonal matrices alternating between
/// the two determinant components; even restarts at random permutations.
/// Runs are independent and execute in parallel.
pub fn p_flow_restarts(
    d: &DistanceMatrix,
    t: &TourMatrix,
    config: &FlowConfig,
) -> Result<Vec<FlowReport>> {
    let n = d.n();
    (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64 * 0x9E37_79B9));
            let p0 = if r == 0 {
                DMatrix::identity(n, n)
            } else if r % 2 == 1 {
                random_orthogonal(n, &mut rng, r % 4 == 3)
            } else {
                let mut order: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    order.swap(i, rng.gen_range(0..=i));
                }
                crate::instance::permutation_from_tour(&Tour::new(order)?)
            };
            integrate_p_flow(d, t, &p0, config)
        })
        .collect()
}

/// Multi-start constrained flow with the same start roster as
/// [`p_flow_restarts`].
pub fn p_flow_constrained_restarts(
    d: &DistanceMatrix,
    t: &TourMatrix,
    lambda0: f64,
    config: &FlowConfig,
) -> Result<Vec<FlowReport>> {
    let n = d.n();
    (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64 * 0x9E37_79B9));
            let p0 = if r == 0 {
                DMatrix::identity(n, n)
            } else if r % 2 == 1 {
                random_orthogonal(n, &mut rng, r % 4 == 3)
            } else {
                let mut order: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    order.swap(i, rng.gen_range(0..=i));
                }
                crate::instance::permutation_from_tour(&Tour::new(order)?)
            };
            integrate_p_flow_constrained(d, t, &p0, lambda0, config)
        })
        .collect()
}

/// Multi-start H-flow: restart 0 starts from the canonical cycle matrix,
/// later restarts from the adjacency of seeded random tours.
pub fn h_flow_restarts(d: &DistanceMatrix, config: &FlowConfig) -> Result<Vec<FlowReport>> {
    let n = d.n();
    (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let t = if r == 0 {
                TourMatrix::undirected_cycle(n)?
            } else {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64 * 0x9E37_79B9));
                let mut order: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    order.swap(i, rng.gen_range(0..=i));
                }
                TourMatrix::from_tour(&Tour::new(order)?)?
            };
            integrate_h_flow(d, &t, config)
        })
        .collect()
}

/// Cheapest rounded tour across reports, if any converged.
pub fn best_tour(reports: &[FlowReport]) -> Option<&Tour> {
    reports
        .iter()
        .filter_map(|r| r.rounded_tour.as_ref())
        .min_by(|a, b| {
            a.cached_cost()
                .unwrap_or(f64::INFINITY)
                .partial_cmp(&b.cached_cost().unwrap_or(f64::INFINITY))
                .expect("finite costs")
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_distance_matrix, permutation_from_tour, random_instance};

    fn small_instance(n: usize, seed: u64) -> (DistanceMatrix, TourMatrix) {
        let d = build_distance_matrix(&random_instance(n, seed)).unwrap();
        let t = TourMatrix::undirected_cycle(n).unwrap();
        (d, t)
    }

    #[test]
    fn grad_f_vanishes_for_commuting_matrices() {
        let eye = DMatrix::identity(4, 4);
        let g = grad_f_p(&eye, &eye, &eye).unwrap();
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn grad_g_vanishes_at_permutations() {
        let tour = Tour::new(vec![2, 0, 3, 1]).unwrap();
        let p = permutation_from_tour(&tour);
        assert!(grad_g_p(&p).norm() < 1e-14);
        assert!(grad_g_p(&DMatrix::identity(4, 4)).norm() < 1e-14);
        assert!(penalty_value(&p).abs() < 1e-14);
    }

    #[test]
    fn penalty_nonnegative_on_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for flip in [false, true] {
            let q = random_orthogonal(5, &mut rng, flip);
            assert!(penalty_value(&q) >= -1e-12);
        }
    }

    #[test]
    fn skew_generator_matches_gradients() {
        // M·P must equal (1−k)·grad F + k·grad G for orthogonal P.
        let (d, t) = small_instance(5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_orthogonal(5, &mut rng, false);
        let a = d.matrix() / d.matrix().norm();
        for k in [0.0, 0.4, 0.99] {
            let m = p_flow_skew(&p, &a, t.matrix(), k);
            assert!((&m + m.transpose()).norm() < 1e-10, "skewness");
            let lhs = &m * &p;
            let rhs = grad_f_p(&p, &a, t.matrix()).unwrap() * (1.0 - k) + grad_g_p(&p) * k;
            assert!((lhs - rhs).norm() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn gradients_tangent_to_manifold() {
        let (d, t) = small_instance(6, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_orthogonal(6, &mut rng, false);
        for g in [grad_f_p(&p, d.matrix(), t.matrix()).unwrap(), grad_g_p(&p)] {
            // Pᵀ·grad must be skew.
            let s = p.transpose() * &g;
            assert!((&s + s.transpose()).norm() <= 1e-10 * s.norm().max(1.0));
        }
    }

    #[test]
    fn h_penalty_derivative_zero_on_binary() {
        let t = TourMatrix::undirected_cycle(6).unwrap();
        assert!(h_flow_penalty_derivative(t.matrix()).norm() < 1e-14);
    }

    #[test]
    fn h_rhs_zero_for_diagonal_pair() {
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 5.0, 6.0]));
        // Penalty derivative of a diagonal 0/1... entries here are not 0/1,
        // so only the k = 0 part is exercised.
        let rhs = h_flow_rhs(&h, &a, 0.0).unwrap();
        assert!(rhs.norm() < 1e-14);
    }

    #[test]
    fn h_update_preserves_spectrum() {
        let (d, t) = small_instance(6, 7);
        let a = d.matrix() / d.matrix().norm();
        let mut h = t.matrix().clone();
        let before = crate::linalg::sym_eig(&h).unwrap().eigenvalues;
        for _ in 0..50 {
            let gen = h_flow_generator(&h, &a, 0.3).unwrap();
            h = h_flow_cayley_update(&h, &gen, 0.05).unwrap();
        }
        let h_sym = (&h + h.transpose()) / 2.0;
        let after = crate::linalg::sym_eig(&h_sym).unwrap().eigenvalues;
        for i in 0..6 {
            assert!((before[i] - after[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn round_identity_and_noise() {
        let tour = Tour::new(vec![1, 3, 0, 2]).unwrap();
        let p = permutation_from_tour(&tour);
        assert_eq!(round_to_permutation(&p), p);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noisy = &p + DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-0.01..0.01));
        assert_eq!(round_to_permutation(&noisy), p);
    }

    #[test]
    fn round_ties_pick_lowest_index() {
        let flat = DMatrix::from_element(4, 4, 0.25);
        let rounded = round_to_permutation(&flat);
        assert_eq!(rounded, DMatrix::identity(4, 4));
        // Scaled identity has a unique maximizer: itself.
        let half = DMatrix::identity(3, 3) / 2.0f64.sqrt();
        assert_eq!(round_to_permutation(&half), DMatrix::identity(3, 3));
    }

    #[test]
    fn p_flow_triangle_reaches_the_unique_tour() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 3.0, 4.0, 3.0, 0.0, 5.0, 4.0, 5.0, 0.0]);
        let d = DistanceMatrix::new(m).unwrap();
        let t = TourMatrix::undirected_cycle(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p0 = random_orthogonal(3, &mut rng, false);
        let report = integrate_p_flow(&d, &t, &p0, &FlowConfig::default()).unwrap();
        assert!(report.converged, "grad {}", report.final_gradient_norm);
        assert_eq!(report.rounded_tour.unwrap().cached_cost().unwrap(), 12.0);
    }

    #[test]
    fn constrained_flow_stationary_at_permutation_start() {
        let (d, t) = small_instance(4, 9);
        let p0 = DMatrix::identity(4, 4);
        // G(P0) = 0: λ must stay put. P moves only along the cost gradient,
        // so compare against the plain k=0 dynamics after one step instead:
        // here we just assert λ is unchanged when the flow starts and stays
        // at a point with zero penalty gradient and zero penalty.
        let report =
            integrate_p_flow_constrained(&d, &t, &p0, 0.5, &FlowConfig::default()).unwrap();
        if let FlowFinalState::Constrained { state, multiplier } = &report.final_state {
            // λ only grows while G > 0; trajectory from a permutation keeps
            // G small, so λ stays near its start.
            assert!(*multiplier >= 0.5 - 1e-12);
            assert!(state.p.nrows() == 4);
        } else {
            panic!("wrong state variant");
        }
    }

    #[test]
    fn constrained_flow_triangle() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 3.0, 4.0, 3.0, 0.0, 5.0, 4.0, 5.0, 0.0]);
        let d = DistanceMatrix::new(m).unwrap();
        let t = TourMatrix::undirected_cycle(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p0 = random_orthogonal(3, &mut rng, false);
        // A weak starting multiplier lets the trajectory settle near signed
        // stationary points of the penalty, where the feasibility residual
        // cannot reach zero; λ₀ well above the cost-gradient scale starts
        // the ascent past that regime.
        let report =
            integrate_p_flow_constrained(&d, &t, &p0, 500.0, &FlowConfig::default()).unwrap();
        assert!(report.converged, "grad {}", report.final_gradient_norm);
        assert_eq!(report.rounded_tour.unwrap().cached_cost().unwrap(), 12.0);
    }

    #[test]
    fn report_serializes_to_json() {
        let (d, t) = small_instance(4, 30);
        let report = integrate_h_flow(&d, &t, &FlowConfig::default()).unwrap();
        let json = report.to_json();
        assert!(json.contains("cost_trace"));
        let back: FlowReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.converged, report.converged);
    }
}
