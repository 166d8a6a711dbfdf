//! Random instance generators for property tests and acceptance runs.

use rand::Rng;

use crate::linalg::{hermitian_part, Matrix, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; keeps the dependency set to `rand` alone
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Matrix with independent standard complex Gaussian entries times `scale`.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Matrix {
    let data = (0..n * n)
        .map(|_| C64::new(gaussian(rng), gaussian(rng)) * scale)
        .collect();
    Matrix::from_vec(n, data).expect("finite by construction")
}

/// Hermitian matrix with operator norm of order `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Matrix {
    let a = random_matrix(rng, n, scale / (n as f64).sqrt().max(1.0));
    hermitian_part(&a)
}

/// Skew-Hermitian matrix (`K* = -K`).
pub fn random_skew<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Matrix {
    random_hermitian(rng, n, scale).scale(crate::linalg::I)
}

/// Haar-ish unitary from Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let g = random_matrix(rng, n, 1.0);
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| g[(i, j)]).collect()).collect();
    for j in 0..n {
        for k in 0..j {
            let proj: C64 = (0..n).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            for i in 0..n {
                let v = cols[k][i];
                cols[j][i] -= proj * v;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in cols[j].iter_mut() {
            *z /= norm;
        }
    }
    let mut u = Matrix::zeros(n);
    for (j, col) in cols.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            u[(i, j)] = z;
        }
    }
    u
}

/// Hermitian positive definite matrix with eigenvalues log-uniform in
/// `[1, cond]` (times `scale`), conjugated by a random unitary.
pub fn random_pd<R: Rng + ?Sized>(rng: &mut R, n: usize, cond: f64, scale: f64) -> Matrix {
    let v = random_unitary(rng, n);
    let log_cond = cond.max(1.0).ln();
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            let frac = if n == 1 {
                rng.gen::<f64>()
            } else if k == 0 {
                0.0
            } else if k == n - 1 {
                1.0
            } else {
                rng.gen::<f64>()
            };
            scale * (frac * log_cond).exp()
        })
        .collect();
    let d = Matrix::from_real_diag(&diag);
    hermitian_part(&(&(&v * &d) * &v.adjoint()))
}

/// Hermitian matrix whose operator norm is exactly `norm`.
pub fn random_hermitian_with_norm<R: Rng + ?Sized>(rng: &mut R, n: usize, norm: f64) -> Matrix {
    let h = random_hermitian(rng, n, 1.0);
    let current = h.operator_norm();
    if current == 0.0 {
        return Matrix::scalar(n, C64::new(norm, 0.0));
    }
    h.scale_real(norm / current)
}
