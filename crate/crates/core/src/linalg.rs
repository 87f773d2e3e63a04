//! Dense symmetric eigendecomposition, Lie-bracket algebra, Cayley-transform
//! steps, and Laplacian connectivity counts.
//!
//! The eigensolver is nalgebra's tridiagonalization-based routine with a
//! deterministic post-pass: eigenpairs are sorted by ascending eigenvalue
//! and each eigenvector is flipped so that its entry of largest magnitude
//! (first such entry on ties) is positive. Downstream consumers depend on
//! eigenvector signs, so the convention is contractual, not cosmetic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues sorted in non-decreasing order.
    pub eigenvalues: DVector<f64>,
    /// Orthogonal matrix; column `i` is the unit eigenvector for
    /// `eigenvalues[i]`, sign-fixed as described in the module docs.
    pub eigenvectors: DMatrix<f64>,
}

/// Relative symmetry tolerance accepted by [`sym_eig`].
pub const SYM_EIG_SYMMETRY_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix.
///
/// Deterministic for identical input bytes. The residual satisfies
/// `‖SV − VΛ‖_F ≤ 1e-8 ‖S‖_F` and `‖VᵀV − I‖_F ≤ 1e-10 n`.
pub fn sym_eig(s: &DMatrix<f64>) -> Result<SymEigen> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix",
            s.nrows(),
            s.ncols()
        )));
    }
    let norm = s.norm();
    let asym = (s - s.transpose()).norm();
    if asym > SYM_EIG_SYMMETRY_TOL * norm.max(1.0) {
        return Err(Error::AsymmetricInput(format!(
            "‖S − Sᵀ‖ = {asym:.3e} exceeds {SYM_EIG_SYMMETRY_TOL:.0e}·‖S‖"
        )));
    }
    let eig = s
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver stalled".to_string()))?;

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });

    let mut eigenvalues = DVector::zeros(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &src) in idx.iter().enumerate() {
        eigenvalues[col] = eig.eigenvalues[src];
        let mut v = eig.eigenvectors.column(src).clone_owned();
        // Sign convention: largest-magnitude entry made positive.
        let mut lead = 0;
        for k in 1..n {
            if v[k].abs() > v[lead].abs() {
                lead = k;
            }
        }
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        eigenvectors.set_column(col, &v);
    }
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Standard Lie bracket `[A, B] = AB − BA`.
pub fn lie_bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_same_square(a, b)?;
    Ok(a * b - b * a)
}

/// Generalized Lie bracket `{A, B} = AᵀB − BᵀA` (always skew-symmetric).
pub fn gen_lie_bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_same_square(a, b)?;
    Ok(a.transpose() * b - b.transpose() * a)
}

fn check_same_square(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() || a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} with {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Orthogonal factor `(I + h/2·M)⁻¹ (I − h/2·M)` of the Cayley update.
///
/// Exact orthogonality (up to linear-solve rounding) requires `M` skew.
pub fn cayley_factor(m: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    debug_assert!(
        (m + m.transpose()).norm() <= 1e-10 * m.norm().max(1.0),
        "cayley_factor expects a skew-symmetric generator"
    );
    let eye = DMatrix::identity(n, n);
    let plus = &eye + m * (h / 2.0);
    let minus = &eye - m * (h / 2.0);
    let lu = plus.lu();
    lu.solve(&minus)
        .ok_or_else(|| Error::StepTooLarge(format!("singular I + h/2·M at h = {h}")))
}

/// One Cayley step `P ← (I + h/2·M)⁻¹ (I − h/2·M) P` for skew `M`.
///
/// The factor is orthogonal with determinant +1, so orthogonality of `P` is
/// preserved to solver precision. A singular system reports `StepTooLarge`;
/// callers react by halving `h`.
pub fn cayley_step(p: &DMatrix<f64>, m: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    check_same_square(p, m)?;
    Ok(cayley_factor(m, h)? * p)
}

/// Frobenius distance of `P` from orthogonality, `‖PᵀP − I‖_F`.
pub fn orthogonality_residual(p: &DMatrix<f64>) -> f64 {
    let n = p.ncols();
    (p.transpose() * p - DMatrix::identity(n, n)).norm()
}

/// Connected components of a 0/1 adjacency matrix via the Laplacian.
///
/// Counts eigenvalues of `L = deg − A` below `1e-8 n`; the count equals the
/// multiplicity of the zero eigenvalue and therefore the number of
/// components. [`connected_components_dfs`] is the combinatorial
/// cross-check.
pub fn laplacian_components(adjacency: &DMatrix<f64>) -> Result<usize> {
    let n = adjacency.nrows();
    validate_adjacency(adjacency)?;
    let mut lap = -adjacency.clone();
    for i in 0..n {
        let deg: f64 = adjacency.row(i).sum();
        lap[(i, i)] = deg;
    }
    let eig = sym_eig(&lap)?;
    let tol = 1e-8 * n as f64;
    Ok(eig.eigenvalues.iter().filter(|&&ev| ev < tol).count())
}

/// Connected components by depth-first search.
pub fn connected_components_dfs(adjacency: &DMatrix<f64>) -> Result<usize> {
    let n = adjacency.nrows();
    validate_adjacency(adjacency)?;
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for u in 0..n {
                if adjacency[(v, u)] == 1.0 && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    Ok(components)
}

fn validate_adjacency(adjacency: &DMatrix<f64>) -> Result<()> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(Error::MalformedInput(format!(
            "{}x{} adjacency",
            adjacency.nrows(),
            adjacency.ncols()
        )));
    }
    for i in 0..n {
        if adjacency[(i, i)] != 0.0 {
            return Err(Error::MalformedInput(format!("self-loop at {i}")));
        }
        for j in 0..n {
            let v = adjacency[(i, j)];
            if v != 0.0 && v != 1.0 {
                return Err(Error::MalformedInput(format!("entry ({i},{j}) = {v}")));
            }
            if v != adjacency[(j, i)] {
                return Err(Error::MalformedInput(format!(
                    "asymmetric adjacency at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// The all-ones matrix.
pub fn ones(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, n, 1.0)
}
