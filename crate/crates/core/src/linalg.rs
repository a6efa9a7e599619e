//! Symmetric eigendecomposition and the symmetric Sylvester solver.
//!
//! The test-time StAE solve `A X + X B = C` always has a symmetric positive
//! definite `A` (a Gram matrix plus a ridge) and a symmetric positive
//! semi-definite `B` (a scaled graph Laplacian). Diagonalizing both sides
//! turns the equation into an entrywise division, which gives the same
//! solution Bartels–Stewart would without needing a Schur form.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Maximum number of cyclic Jacobi sweeps.
pub const MAX_SWEEPS: usize = 100;
/// Off-diagonal Frobenius norm at which Jacobi stops, relative to `‖A‖_F`.
pub const OFF_TOLERANCE: f64 = 1e-12;
/// Smallest admissible `λᵢ + μⱼ` in [`solve_sylvester`].
pub const PENCIL_TOLERANCE: f64 = 1e-12;

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenPair {
    /// `V · diag(λ) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let scaled = Matrix::from_fn(n, n, |i, j| self.vectors.get(i, j) * self.values[j]);
        scaled.matmul_nt(&self.vectors)
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NonSquare { rows: a.rows(), cols: a.cols() });
    }
    let asym = a.max_asymmetry().unwrap_or(0.0);
    if asym > 1e-9 * (1.0 + a.max_abs()) {
        return Err(Error::NotSymmetric { max_asymmetry: asym });
    }
    Ok(())
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    libm::sqrt(s)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized as `(a + aᵀ)/2` after the symmetry check, so
/// round-off asymmetry below the tolerance does not leak into the result.
pub fn sym_eig(a: &Matrix) -> Result<EigenPair> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut w = Matrix::from_fn(n, n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)));
    let mut v = Matrix::identity(n);
    let tol = OFF_TOLERANCE * w.frobenius();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&w) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = w.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (w.get(q, q) - w.get(p, p)) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                rotate(&mut w, &mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        let off = off_diagonal_norm(&w);
        if off > tol {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS, off_norm: off });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w.get(i, i).total_cmp(&w.get(j, j)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| w.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(EigenPair { values, vectors })
}

/// Applies `W ← Jᵀ W J`, `V ← V J` for the rotation in the `(p, q)` plane.
fn rotate(w: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = w.rows();
    for k in 0..n {
        let wkp = w.get(k, p);
        let wkq = w.get(k, q);
        w.set(k, p, c * wkp - s * wkq);
        w.set(k, q, s * wkp + c * wkq);
    }
    for k in 0..n {
        let wpk = w.get(p, k);
        let wqk = w.get(q, k);
        w.set(p, k, c * wpk - s * wqk);
        w.set(q, k, s * wpk + c * wqk);
    }
    // exact zero for the annihilated pair
    w.set(p, q, 0.0);
    w.set(q, p, 0.0);
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Solves `a · X + X · b = c` for symmetric `a` (m×m) and `b` (n×n).
///
/// With `a = Vₐ Λ Vₐᵀ` and `b = V_b M V_bᵀ` the solution is
/// `X = Vₐ [(Vₐᵀ c V_b) ⊘ (λᵢ + μⱼ)] V_bᵀ`.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NonSquare { rows: a.rows(), cols: a.cols() });
    }
    if !b.is_square() {
        return Err(Error::NonSquare { rows: b.rows(), cols: b.cols() });
    }
    if c.shape() != (a.rows(), b.rows()) {
        return Err(Error::dims("solve_sylvester", (a.rows(), b.rows()), c.shape()));
    }
    let ea = sym_eig(a)?;
    let eb = sym_eig(b)?;

    let min_sum = ea.values[0] + eb.values[0];
    if a.rows() > 0 && b.rows() > 0 && min_sum <= PENCIL_TOLERANCE {
        return Err(Error::SingularPencil { min_sum });
    }

    let mut t = ea.vectors.matmul_tn(c).matmul(&eb.vectors);
    for i in 0..t.rows() {
        let li = ea.values[i];
        for (j, x) in t.row_mut(i).iter_mut().enumerate() {
            *x /= li + eb.values[j];
        }
    }
    Ok(ea.vectors.matmul(&t).matmul_nt(&eb.vectors))
}
