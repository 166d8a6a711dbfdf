//! Dense complex N x N matrices and the Hermitian kernels built on them.
//!
//! "Symmetric" in this crate always means `A* = A` with `A*` the conjugate
//! transpose, i.e. complex Hermitian.

mod eigen;

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use eigen::{hermitian_eigendecomposition, psd_sqrt, HermitianEigen};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Default tolerance for the Hermitian check on eigensolver input.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Relative pivot threshold below which a matrix is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-14;

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, C64::new(1.0, 0.0))
    }

    pub fn scalar(dim: usize, value: C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = value;
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    /// Builds a matrix from a row-major entry vector of length `dim * dim`.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Matrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(dim, data)
    }

    /// Real matrix from rows; convenient in tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// Matrix from separate real and imaginary parts, row-major.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let dim = re.len();
        if im.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: im.len(),
            });
        }
        let mut rows = Vec::with_capacity(dim);
        for (r, i) in re.iter().zip(im) {
            if r.len() != dim || i.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len().max(i.len()),
                });
            }
            rows.push(r.iter().zip(i).map(|(&a, &b)| C64::new(a, b)).collect());
        }
        Self::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn real_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.iter().map(|z| z.re).collect()).collect()
    }

    pub fn imag_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.iter().map(|z| z.im).collect()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scale(&self, c: C64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Spectral norm: the largest singular value.
    pub fn operator_norm(&self) -> f64 {
        operator_norm(self)
    }

    /// `self += c * other`, used by the convolution kernels.
    pub fn add_scaled(&mut self, other: &Matrix, c: C64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b * c;
        }
    }

    /// `self += a * b` without allocating the product.
    pub fn add_product(&mut self, a: &Matrix, b: &Matrix) {
        let n = self.dim;
        debug_assert!(a.dim == n && b.dim == n);
        for i in 0..n {
            for k in 0..n {
                let aik = a.data[i * n + k];
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                let brow = &b.data[k * n..(k + 1) * n];
                let out = &mut self.data[i * n..(i + 1) * n];
                for (o, &bkj) in out.iter_mut().zip(brow) {
                    *o += aik * bkj;
                }
            }
        }
    }

    fn check_same(&self, other: &Matrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other)?;
        Ok(self + other)
    }

    pub fn try_sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other)?;
        Ok(self - other)
    }

    pub fn try_mul(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other)?;
        Ok(self * other)
    }

    /// Operator-norm distance to `A*`, measured through the Frobenius norm
    /// (an upper bound for the spectral norm).
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Returns an error unless `|A - A*| <= tol * max(1, |A|)`.
    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        let scale = self.frobenius_norm().max(1.0);
        let defect = self.hermitian_defect();
        if defect > tol * scale {
            return Err(Error::NotHermitian {
                asymmetry: defect,
                tolerance: tol * scale,
            });
        }
        Ok(())
    }

    /// Multiplies column `j` by `c`.
    pub(crate) fn scale_col(&mut self, j: usize, c: C64) {
        let n = self.dim;
        for i in 0..n {
            self.data[i * n + j] *= c;
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}x{}) [", self.dim, self.dim)?;
        for row in self.data.chunks(self.dim.max(1)) {
            write!(f, "  ")?;
            for z in row {
                write!(f, "{:>11.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<'a> Add<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn add(self, rhs: &'a Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &'a Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &'a Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        let mut out = Matrix::zeros(self.dim);
        out.add_product(self, rhs);
        out
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Matrix> for Matrix {
    fn sub_assign(&mut self, rhs: &Matrix) {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// `re A = (A + A*)/2`.
pub fn hermitian_part(a: &Matrix) -> Matrix {
    let n = a.dim;
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
        }
    }
    out
}

/// `im A = (A - A*)/(2i)`. The result is Hermitian and
/// `A = hermitian_part(A) + i * skew_part(A)`.
pub fn skew_part(a: &Matrix) -> Matrix {
    let n = a.dim;
    let mut out = Matrix::zeros(n);
    let half_over_i = C64::new(0.0, -0.5);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = (a[(i, j)] - a[(j, i)].conj()) * half_over_i;
        }
    }
    out
}

pub fn operator_norm(a: &Matrix) -> f64 {
    if a.dim == 0 {
        return 0.0;
    }
    if a.dim == 1 {
        return a.data[0].norm();
    }
    let gram = hermitian_part(&(&a.adjoint() * a));
    match eigen::jacobi_hermitian(&gram) {
        Ok(e) => e.eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        // the Gram matrix is Hermitian by construction; Jacobi does not fail on it
        Err(_) => a.frobenius_norm(),
    }
}

/// LU factorization with partial pivoting; returns (LU, permutation sign,
/// smallest pivot ratio) or the offending pivot.
fn lu(a: &Matrix) -> (Matrix, Vec<usize>, f64, f64) {
    let n = a.dim;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].norm()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        min_pivot = min_pivot.min(pmax);
        if pmax == 0.0 {
            continue;
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            for j in k + 1..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
        }
    }
    (lu, perm, sign, min_pivot)
}

pub fn determinant(a: &Matrix) -> C64 {
    let (lu, _, sign, _) = lu(a);
    let mut d = C64::new(sign, 0.0);
    for i in 0..a.dim {
        d *= lu[(i, i)];
    }
    d
}

/// Inverse by LU with partial pivoting. Fails when a pivot drops below
/// `SINGULAR_TOL` times the largest entry.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.dim;
    let scale = a.max_abs();
    let (lu, perm, _, min_pivot) = lu(a);
    if scale == 0.0 || min_pivot <= SINGULAR_TOL * scale {
        return Err(Error::Singular { pivot: min_pivot });
    }
    let mut inv = Matrix::zeros(n);
    for col in 0..n {
        // solve L y = P e_col
        let mut x: Vec<C64> = (0..n)
            .map(|i| if perm[i] == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
            .collect();
        for i in 0..n {
            for k in 0..i {
                let l = lu[(i, k)];
                x[i] = x[i] - l * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = lu[(i, k)];
                x[i] = x[i] - u * x[k];
            }
            x[i] /= lu[(i, i)];
        }
        for i in 0..n {
            inv[(i, col)] = x[i];
        }
    }
    Ok(inv)
}

/// Lower-triangular Cholesky factor `L` with `L L* = A` for Hermitian
/// positive definite `A`.
pub fn cholesky_lower(a: &Matrix) -> Result<Matrix> {
    a.check_hermitian(HERMITIAN_TOL)?;
    let n = a.dim;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 1e-12 * scale {
            let min_eigenvalue = hermitian_eigendecomposition(a)
                .map(|e| e.eigenvalues[0])
                .unwrap_or(d);
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hermitian_part_examples() {
        let d = Matrix::from_real_diag(&[1.0, 2.0]);
        assert_eq!(hermitian_part(&d), d);

        let skew = Matrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap();
        assert!(hermitian_part(&skew).is_zero());

        let a = Matrix::from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]]).unwrap();
        let expected = Matrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(hermitian_part(&a), expected);
    }

    #[test]
    fn skew_part_examples() {
        let h = Matrix::from_rows(&[vec![c(1.0, 0.0), c(2.0, 3.0)], vec![c(2.0, -3.0), c(-1.0, 0.0)]])
            .unwrap();
        assert!(skew_part(&h).is_zero());

        let ii = Matrix::scalar(3, I);
        assert_eq!(skew_part(&ii), Matrix::identity(3));

        let a = Matrix::from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]]).unwrap();
        let expected =
            Matrix::from_rows(&[vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]])
                .unwrap();
        assert_eq!(skew_part(&a), expected);
    }

    #[test]
    fn inverse_norm_determinant_examples() {
        assert_eq!(inverse(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let d = Matrix::from_real_diag(&[1.0, -3.0]);
        assert!((operator_norm(&d) - 3.0).abs() < 1e-14);
        let a = Matrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert!((determinant(&a) - c(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn inverse_rejects_singular() {
        let a = Matrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(inverse(&a), Err(Error::Singular { .. })));
        assert!(matches!(inverse(&Matrix::zeros(2)), Err(Error::Singular { .. })));
    }

    #[test]
    fn inverse_of_complex_matrix() {
        let a = Matrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 1.0), c(2.0, 0.0)],
            vec![c(3.0, -1.0), c(0.5, 0.0), c(0.0, 1.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(-2.0, 0.5)],
        ])
        .unwrap();
        let inv = inverse(&a).unwrap();
        let prod = &a * &inv;
        assert!((&prod - &Matrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn operator_norm_of_rank_one() {
        // u v^T with |u| = sqrt(5), |v| = sqrt(2)
        let a = Matrix::from_real_rows(&[&[1.0, 1.0], &[2.0, 2.0]]).unwrap();
        assert!((operator_norm(&a) - (10.0f64).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn cholesky_factor() {
        let a = Matrix::from_rows(&[vec![c(4.0, 0.0), c(1.0, 1.0)], vec![c(1.0, -1.0), c(3.0, 0.0)]])
            .unwrap();
        let l = cholesky_lower(&a).unwrap();
        assert_eq!(l[(0, 1)], c(0.0, 0.0));
        assert!((&(&l * &l.adjoint()) - &a).max_abs() < 1e-14);
        let indefinite = Matrix::from_real_diag(&[1.0, -1.0]);
        assert!(matches!(
            cholesky_lower(&indefinite),
            Err(Error::NotPositiveDefinite { min_eigenvalue }) if min_eigenvalue < 0.0
        ));
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(
            Matrix::from_vec(2, vec![c(0.0, 0.0); 3]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Matrix::from_vec(1, vec![c(f64::NAN, 0.0)]),
            Err(Error::NonFinite)
        ));
        assert!(Matrix::identity(2).try_mul(&Matrix::identity(3)).is_err());
    }
}
