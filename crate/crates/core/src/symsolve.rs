//! Symmetric-product equations `S(U, A) = (UA + AU)/2 = B` for Hermitian
//! positive definite `U`.
//!
//! In an eigenbasis of `U` with eigenvalues `mu_j` the operator acts
//! entrywise, `S(U, A)_jk = (mu_j + mu_k) a_jk / 2`, so it is inverted by
//! dividing and conjugating back. For Hermitian `A`, `re(UA) = S(U, A)`; for
//! skew-Hermitian `A = iH`, `im(UA) = S(U, H)`. Both bijections therefore
//! reduce to the same solver.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigendecomposition, hermitian_part, Matrix, I};

/// Hermitian tolerance on the right-hand side (relative to `max(1, |B|)`).
pub const RHS_HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SymSolveReport {
    pub solution: Matrix,
    /// Operator norm of `S(U, A) - B`.
    pub residual_norm: f64,
    /// `max |a_jk| / (|U^-1| |B|)` in the eigenbasis of `U`; at most one.
    pub bound_ratio: f64,
    /// `min_{j,k} (mu_j + mu_k)`, small when `U` is close to singular.
    pub min_pair_sum: f64,
}

pub fn sym_product(u: &Matrix, a: &Matrix) -> Result<Matrix> {
    let ua = u.try_mul(a)?;
    let au = a * u;
    Ok((&ua + &au).scale_real(0.5))
}

/// The unique Hermitian `A` with `S(U, A) = B`.
pub fn solve_sym(u: &Matrix, b: &Matrix) -> Result<SymSolveReport> {
    if u.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: b.dim(),
        });
    }
    let eig = hermitian_eigendecomposition(u)?;
    let mu = &eig.eigenvalues;
    let u_norm = eig.max_abs_eigenvalue();
    let mu_min = eig.min_eigenvalue();
    if mu_min <= 1e-12 * u_norm || u_norm == 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: mu_min });
    }
    b.check_hermitian(RHS_HERMITIAN_TOL)?;

    let n = u.dim();
    let v = &eig.basis;
    let beta = &(&v.adjoint() * b) * v;
    let mut alpha = Matrix::zeros(n);
    let mut max_alpha: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            let a = beta[(j, k)] * (2.0 / (mu[j] + mu[k]));
            max_alpha = max_alpha.max(a.norm());
            alpha[(j, k)] = a;
        }
    }
    let solution = hermitian_part(&(&(v * &alpha) * &v.adjoint()));

    let residual_norm = (&sym_product(u, &solution)? - b).operator_norm();
    let b_norm = b.operator_norm();
    let bound_ratio = if b_norm == 0.0 {
        0.0
    } else {
        max_alpha * mu_min / b_norm
    };
    Ok(SymSolveReport {
        solution,
        residual_norm,
        bound_ratio,
        min_pair_sum: 2.0 * mu_min,
    })
}

/// The unique skew-Hermitian `A` with `im(UA) = C`, namely
/// `A = i * solve_sym(U, C)`.
pub fn solve_skew(u: &Matrix, c: &Matrix) -> Result<Matrix> {
    let h = solve_sym(u, c)?.solution;
    Ok(h.scale(I))
}

/// `re(UA) = B` for Hermitian unknown `A`; identical to `solve_sym`.
pub fn solve_re(u: &Matrix, b: &Matrix) -> Result<Matrix> {
    Ok(solve_sym(u, b)?.solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{operator_norm, skew_part, C64};
    use crate::random::{random_hermitian, random_pd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Independent route: vectorize `(UA + AU)/2 = B` as an N^2 x N^2 complex
    /// system `(I (x) U + U^T (x) I)/2 vec(A) = vec(B)` and solve it by
    /// Gaussian elimination.
    fn kron_oracle(u: &Matrix, b: &Matrix) -> Matrix {
        let n = u.dim();
        let m = n * n;
        let mut sys = vec![vec![c(0.0, 0.0); m + 1]; m];
        // vec index of A[i][j] is i*n + j (row-major)
        for i in 0..n {
            for j in 0..n {
                let row = i * n + j;
                for k in 0..n {
                    // (UA)_ij = sum_k U_ik A_kj
                    sys[row][k * n + j] += u[(i, k)] * 0.5;
                    // (AU)_ij = sum_k A_ik U_kj
                    sys[row][i * n + k] += u[(k, j)] * 0.5;
                }
                sys[row][m] = b[(i, j)];
            }
        }
        for col in 0..m {
            let p = (col..m)
                .max_by(|&x, &y| sys[x][col].norm().total_cmp(&sys[y][col].norm()))
                .unwrap();
            sys.swap(col, p);
            let piv = sys[col][col];
            for r in 0..m {
                if r != col {
                    let f = sys[r][col] / piv;
                    for k in col..=m {
                        let v = sys[col][k];
                        sys[r][k] -= f * v;
                    }
                }
            }
        }
        let data = (0..m).map(|r| sys[r][m] / sys[r][r]).collect();
        Matrix::from_vec(n, data).unwrap()
    }

    #[test]
    fn sym_product_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_hermitian(&mut rng, 3, 1.0);
        assert_eq!(sym_product(&Matrix::identity(3), &a).unwrap(), a);

        let u = Matrix::from_real_diag(&[1.0, 3.0]);
        let a = Matrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let expected = Matrix::from_real_rows(&[&[0.0, 2.0], &[2.0, 0.0]]).unwrap();
        assert_eq!(sym_product(&u, &a).unwrap(), expected);

        let u = random_pd(&mut rng, 4, 10.0, 1.0);
        let skew = random_hermitian(&mut rng, 4, 1.0).scale(I);
        let s = sym_product(&u, &skew).unwrap();
        assert!(hermitian_part(&s).max_abs() < 1e-14);
    }

    #[test]
    fn sym_product_dimension_mismatch() {
        assert!(matches!(
            sym_product(&Matrix::identity(2), &Matrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn solve_sym_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_hermitian(&mut rng, 3, 1.0);
        let r = solve_sym(&Matrix::identity(3), &b).unwrap();
        assert!((&r.solution - &b).max_abs() < 1e-15);

        let u = Matrix::from_real_diag(&[1.0, 3.0]);
        let b = Matrix::from_real_rows(&[&[0.0, 2.0], &[2.0, 0.0]]).unwrap();
        let oracle = kron_oracle(&u, &b);
        let expected = Matrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert!((&oracle - &expected).max_abs() < 1e-15);
        let r = solve_sym(&u, &b).unwrap();
        assert!((&r.solution - &expected).max_abs() < 1e-15);

        let u = Matrix::from_real_diag(&[2.0, 5.0]);
        let b = Matrix::from_real_diag(&[3.0, -1.0]);
        let r = solve_sym(&u, &b).unwrap();
        let expected = Matrix::from_real_diag(&[1.5, -0.2]);
        assert!((&r.solution - &expected).max_abs() < 1e-15);
        assert!((r.min_pair_sum - 4.0).abs() < 1e-15);
    }

    #[test]
    fn solve_sym_matches_vectorized_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=5 {
            let u = random_pd(&mut rng, n, 100.0, 1.0);
            let b = random_hermitian(&mut rng, n, 1.0);
            let got = solve_sym(&u, &b).unwrap().solution;
            let want = kron_oracle(&u, &b);
            assert!(operator_norm(&(&got - &want)) < 1e-11);
        }
    }

    #[test]
    fn solve_skew_examples() {
        let a = solve_skew(&Matrix::identity(2), &Matrix::identity(2)).unwrap();
        assert!((&a - &Matrix::scalar(2, I)).max_abs() < 1e-15);

        let u = Matrix::from_real_diag(&[1.0, 3.0]);
        let cm = Matrix::from_real_rows(&[&[0.0, 2.0], &[2.0, 0.0]]).unwrap();
        let a = solve_skew(&u, &cm).unwrap();
        let expected =
            Matrix::from_rows(&[vec![c(0.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]])
                .unwrap();
        assert!((&a - &expected).max_abs() < 1e-15);
        assert!((&skew_part(&(&u * &a)) - &cm).max_abs() < 1e-14);

        let zero = solve_skew(&u, &Matrix::zeros(2)).unwrap();
        assert!(zero.is_zero());
    }

    #[test]
    fn errors() {
        let indefinite = Matrix::from_real_diag(&[1.0, -1.0]);
        assert!(matches!(
            solve_sym(&indefinite, &Matrix::identity(2)),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let singular = Matrix::from_real_diag(&[1.0, 0.0]);
        assert!(matches!(
            solve_sym(&singular, &Matrix::identity(2)),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let non_herm = Matrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            solve_sym(&Matrix::identity(2), &non_herm),
            Err(Error::NotHermitian { .. })
        ));
        assert!(solve_skew(&indefinite, &Matrix::identity(2)).is_err());
    }

    #[test]
    fn uniqueness_recovers_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=6 {
            let u = random_pd(&mut rng, n, 1e3, 1.0);
            let a = random_hermitian(&mut rng, n, 1.0);
            let b = sym_product(&u, &a).unwrap();
            let back = solve_sym(&u, &b).unwrap().solution;
            assert!(operator_norm(&(&back - &a)) < 1e-10);
        }
    }
}
