//! Cyclic Jacobi eigensolver for complex Hermitian matrices.
//!
//! Each rotation first multiplies row/column `q` by a unit phase so that the
//! pivot `a_pq` becomes real and positive, then applies a real Givens
//! rotation that annihilates it.

use super::{hermitian_part, Matrix, C64, HERMITIAN_TOL};
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
pub const OFF_DIAGONAL_TOL: f64 = 1e-14;

/// Eigenvalues in ascending order and a unitary matrix whose columns are the
/// matching eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub basis: Matrix,
}

impl HermitianEigen {
    /// `basis * diag(f(eigenvalues)) * basis*`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> C64) -> Matrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.basis.clone();
        for (j, &mu) in self.eigenvalues.iter().enumerate() {
            scaled.scale_col(j, f(mu));
        }
        let mut out = Matrix::zeros(n);
        out.add_product(&scaled, &self.basis.adjoint());
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.map_spectrum(|mu| C64::new(mu, 0.0))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized with
/// `hermitian_part` after checking that it is Hermitian within 1e-12.
pub fn hermitian_eigendecomposition(a: &Matrix) -> Result<HermitianEigen> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    a.check_hermitian(HERMITIAN_TOL)?;
    jacobi_hermitian(&hermitian_part(a))
}

pub(crate) fn jacobi_hermitian(h: &Matrix) -> Result<HermitianEigen> {
    let n = h.dim();
    let mut a = h.clone();
    let mut v = Matrix::identity(n);
    let threshold = OFF_DIAGONAL_TOL * h.frobenius_norm();

    let mut converged = false;
    let mut off = off_diagonal_norm(&a);
    for _ in 0..MAX_SWEEPS {
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        off = off_diagonal_norm(&a);
    }
    if !converged && off > threshold {
        return Err(Error::NoConvergence {
            sweeps: MAX_SWEEPS,
            off_norm: off,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re).then(i.cmp(&j)));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut basis = Matrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        // phase: largest-magnitude component real positive, ties to the lowest row
        let mut pivot_row = 0;
        let mut best = -1.0;
        for r in 0..n {
            let m = v[(r, old_col)].norm();
            if m > best {
                best = m;
                pivot_row = r;
            }
        }
        let z = v[(pivot_row, old_col)];
        let phase = if best > 0.0 { z.conj() / best } else { C64::new(1.0, 0.0) };
        for r in 0..n {
            basis[(r, new_col)] = v[(r, old_col)] * phase;
        }
        basis[(pivot_row, new_col)] = C64::new(best, 0.0);
    }
    Ok(HermitianEigen { eigenvalues, basis })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let n = a.dim();
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    // D* A D with D = diag(.., 1 at p, conj(phase) at q, ..) makes a_pq = r
    let phase = apq / r;
    let dq = phase.conj();
    a.scale_col(q, dq);
    for k in 0..n {
        a[(q, k)] *= phase;
    }
    v.scale_col(q, dq);

    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * s;
        a[(k, q)] = akp * s + akq * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * s;
        a[(q, k)] = apk * s + aqk * c;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * s;
        v[(k, q)] = vkp * s + vkq * c;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
}

/// The unique Hermitian positive definite square root of a Hermitian
/// positive definite matrix.
pub fn psd_sqrt(a: &Matrix) -> Result<Matrix> {
    let eig = hermitian_eigendecomposition(a)?;
    let scale = eig.max_abs_eigenvalue();
    let min = eig.min_eigenvalue();
    if scale == 0.0 || min <= 1e-12 * scale.max(1.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(hermitian_part(&eig.map_spectrum(|mu| C64::new(mu.sqrt(), 0.0))))
}
