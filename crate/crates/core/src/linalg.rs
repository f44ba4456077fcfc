//! Small dense linear algebra helpers: a cyclic Jacobi eigensolver for symmetric
//! matrices and closed forms for symmetric 2×2 blocks.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::{Error, Result};

/// Relative off-diagonal tolerance of the Jacobi sweeps.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored column-wise, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Checks symmetry up to `tol` relative to the largest entry.
pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps over all off-diagonal pairs, annihilating each with a plane rotation, until
/// the off-diagonal Frobenius norm drops below `JACOBI_TOL` times the matrix norm.
/// Only the upper triangle of `a` is trusted; the input is symmetrised first.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let n = a.nrows();
    let mut m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm();

    if scale > 0.0 {
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if off_diagonal_norm(&m) <= JACOBI_TOL * scale {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
        if !converged && off_diagonal_norm(&m) > JACOBI_TOL * scale {
            return Err(Error::Convergence {
                what: "jacobi eigensolver",
                iterations: JACOBI_MAX_SWEEPS,
                residual: off_diagonal_norm(&m),
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = m.nrows();

    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    // exact zero on the annihilated pair keeps the sweep monotone
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Largest eigenvalue of the symmetric part of `a`.
pub fn lambda_max_sym_part(a: &DMatrix<f64>) -> Result<f64> {
    let sym = 0.5 * (a + a.transpose());
    Ok(symmetric_eigen(&sym)?.max())
}

/// Eigenvalues `(λ_min, λ_max)` of a symmetric 2×2 matrix in closed form.
pub fn sym2_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let a = m[(0, 0)];
    let c = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mean - radius, mean + radius)
}

/// Largest eigenvalue of the symmetric part of a (not necessarily symmetric) 2×2 matrix.
pub fn lambda_max_sym_part2(m: &Matrix2<f64>) -> f64 {
    sym2_eigenvalues(&(0.5 * (m + m.transpose()))).1
}

/// Symmetric positive-definite square root of an SPD 2×2 matrix.
///
/// Uses `√M = (M + √det·I) / √(tr M + 2√det)`, which holds for every SPD 2×2 matrix.
pub fn spd_sqrt2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m.determinant();
    let tr = m.trace();
    if !(m[(0, 0)] > 0.0 && det > 0.0) {
        return Err(Error::Construction(format!(
            "matrix is not positive definite (a = {}, det = {})",
            m[(0, 0)],
            det
        )));
    }
    let sd = det.sqrt();
    Ok((m + Matrix2::identity() * sd) / (tr + 2.0 * sd).sqrt())
}
