//! Formal symmetric preparation `F = U (t I + M) U*`.
//!
//! Coefficients are matched degree by degree. With `p = j + |alpha|` the
//! schedule is, for each `p`:
//!
//! 1. `U_{p,0}` from the `F_{p+1,0}` equation;
//! 2. for `r = 0..p`: every `M_alpha` with `|alpha| = r + 1` from
//!    `F_{0,alpha}`, then every `U_{p-r-1,alpha}` with `|alpha| = r + 1` from
//!    `F_{p-r,alpha}`.
//!
//! Each `U` step solves `2 re(U_{j,alpha} U_{0,0}*) = RHS` where RHS is
//! `F_{j+1,alpha}` minus every other term of the product, all of which are
//! already known at that point. With `U_{0,0} > 0` Hermitian the unique
//! Hermitian solution comes from the symmetric-product solver.
//!
//! Coefficients of `F` above its truncation order are taken to be zero, so
//! `U` of total degree `P` (which is fixed by `F` at degree `P + 1`) is exact
//! for polynomial input.

mod linearization;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_lower, hermitian_eigendecomposition, hermitian_part, inverse, psd_sqrt, Matrix,
};
use crate::series::{compositions, MSeries, MultiIndex, RadixKey, XSeries};
use crate::symsolve::solve_sym;

pub use linearization::{apply_df, nonlinear_f_map, solve_df_at_m0, twice_re, SolveMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Hermitian check on the coefficients of `F`, relative to `|F|`.
    pub hermitian: f64,
    /// `|F_{0,0}| <= f00 * |F|`.
    pub f00: f64,
    /// Hermitian check on every recursion right-hand side, relative to the
    /// larger of `|F|` and the size of the products summed into it.
    pub rhs_hermitian: f64,
    /// Acceptance threshold for `residual_max / |F|`.
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-12,
            f00: 1e-12,
            rhs_hermitian: 1e-9,
            residual: 1e-9,
        }
    }
}

/// Which solution of the underdetermined `re`-equations is selected.
#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    /// `U_{0,0}` the positive square root of `F_{1,0}`, every `U_{j,alpha}`
    /// Hermitian. This solution is unique.
    HermitianUnique,
    /// `U_{0,0}` the lower Cholesky factor and
    /// `U_{j,alpha} = (RHS/2 + K_{j,alpha}) (U_{0,0}*)^{-1}` with a
    /// skew-Hermitian gauge `K` (missing entries are zero).
    General { gauge: BTreeMap<MultiIndex, Matrix> },
}

impl Branch {
    pub fn general() -> Self {
        Branch::General {
            gauge: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Branch::HermitianUnique => "hermitian",
            Branch::General { .. } => "general",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparationInput {
    pub f: MSeries,
    pub order: u32,
    pub branch: Branch,
    pub tolerances: Tolerances,
}

impl PreparationInput {
    pub fn new(f: MSeries, order: u32, branch: Branch) -> Self {
        PreparationInput {
            f,
            order,
            branch,
            tolerances: Tolerances::default(),
        }
    }
}

/// Per-total-degree maximum coefficient norm of `F - U (tI + M) U*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTable {
    pub per_degree: Vec<f64>,
}

impl ResidualTable {
    pub fn max(&self) -> f64 {
        self.per_degree.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct PreparationResult {
    pub u: MSeries,
    pub m: XSeries,
    pub branch: Branch,
    pub residual_max: f64,
    pub diagnostics: ResidualTable,
    /// `max_{j,k} |F|` used to scale the tolerances.
    pub f_norm: f64,
    /// Largest Hermitian defect seen in a recursion right-hand side.
    pub rhs_max_defect: f64,
    /// Condition number of `F_{1,0}`.
    pub f10_condition: f64,
}

impl PreparationResult {
    /// `residual_max <= tol * |F|`.
    pub fn within(&self, tol: f64) -> bool {
        self.residual_max <= tol * self.f_norm.max(f64::MIN_POSITIVE)
    }
}

/// Computes `(U, M)` by coefficient matching up to total degree `order`.
pub fn prepare_formal(input: &PreparationInput) -> Result<PreparationResult> {
    let PreparationInput {
        f,
        order,
        branch,
        tolerances: tol,
    } = input;
    let order = *order;
    let nvars = f.nvars();
    let dim = f.dim();

    let f_norm = f.max_norm();
    let scale = f_norm.max(1.0);
    for (k, c) in f.iter() {
        let defect = c.hermitian_defect();
        if defect > tol.hermitian * scale {
            return Err(Error::NonHermitianInput {
                index: k.to_string(),
                asymmetry: defect,
            });
        }
    }
    let f00 = f.coeff_or_zero(&MultiIndex::zero(nvars));
    let f00_norm = f00.operator_norm();
    if f00_norm > tol.f00 * f_norm {
        return Err(Error::NonzeroConstantTerm {
            norm: f00_norm,
            tolerance: tol.f00 * f_norm,
        });
    }
    let f10 = hermitian_part(&f.coeff_or_zero(&MultiIndex::t(1, nvars)));
    let f10_eig = hermitian_eigendecomposition(&f10)?;
    let f10_min = f10_eig.min_eigenvalue();
    let f10_max = f10_eig.max_abs_eigenvalue();
    if f10_max == 0.0 || f10_min <= 1e-12 * f10_max {
        return Err(Error::NotPositiveTimeDerivative {
            min_eigenvalue: f10_min,
        });
    }

    let u00 = match branch {
        Branch::HermitianUnique => psd_sqrt(&f10)?,
        Branch::General { gauge } => {
            for (k, g) in gauge {
                if k.nvars() != nvars || g.dim() != dim {
                    return Err(Error::ShapeMismatch(format!("gauge entry at {k}")));
                }
                let herm = hermitian_part(g).operator_norm();
                if herm > 1e-12 * g.operator_norm().max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "gauge entry at {k} is not skew-Hermitian"
                    )));
                }
            }
            cholesky_lower(&f10)?
        }
    };

    let mut engine = Engine {
        f,
        radix: RadixKey::new(nvars, order + 1)?,
        nvars,
        dim,
        u: BTreeMap::new(),
        m: BTreeMap::new(),
        u00_inv: inverse(&u00)?,
        u00_adj_inv: inverse(&u00.adjoint())?,
        u00: u00.clone(),
        branch,
        rhs_tol: tol.rhs_hermitian,
        rhs_scale: scale,
        rhs_max_defect: 0.0,
    };
    engine.u.insert(engine.radix.key(&MultiIndex::zero(nvars)), u00);

    let mut m_done: BTreeSet<Vec<u32>> = BTreeSet::new();
    for p in 1..=order {
        engine.solve_u(&MultiIndex::t(p, nvars))?;
        for r in 0..p {
            let layer = compositions(r + 1, nvars);
            for alpha in &layer {
                if m_done.insert(alpha.clone()) {
                    engine.solve_m(alpha)?;
                }
            }
            for alpha in layer {
                engine.solve_u(&MultiIndex::new(p - r - 1, alpha))?;
            }
        }
    }

    let u = engine.u_series(order);
    let m = engine.m_series(order)?;
    let rhs_max_defect = engine.rhs_max_defect;
    let diagnostics = verify_preparation(f, &u, &m, order)?;
    Ok(PreparationResult {
        residual_max: diagnostics.max(),
        diagnostics,
        u,
        m,
        branch: branch.clone(),
        f_norm,
        rhs_max_defect,
        f10_condition: f10_max / f10_min,
    })
}

/// Preparation of `F - F(0,0)`; returns the result and the remainder
/// `F(0,0)` so that `F = U (tI + M) U* + F(0,0)`.
pub fn prepare_with_remainder(
    f: &MSeries,
    order: u32,
    branch: Branch,
) -> Result<(PreparationResult, Matrix)> {
    prepare_with_remainder_tol(f, order, branch, Tolerances::default())
}

pub fn prepare_with_remainder_tol(
    f: &MSeries,
    order: u32,
    branch: Branch,
    tolerances: Tolerances,
) -> Result<(PreparationResult, Matrix)> {
    let zero = MultiIndex::zero(f.nvars());
    let f00 = f.coeff_or_zero(&zero);
    let shifted = f.sub(&MSeries::constant(f.nvars(), f.order(), f00.clone()))?;
    let mut input = PreparationInput::new(shifted, order, branch);
    input.tolerances = tolerances;
    let result = prepare_formal(&input)?;
    Ok((result, f00))
}

/// Residual of `F = U (tI + M) U*` per total degree up to `order`.
pub fn verify_preparation(f: &MSeries, u: &MSeries, m: &XSeries, order: u32) -> Result<ResidualTable> {
    let pencil = MSeries::pencil(m).with_order(order);
    let u = u.with_order(order);
    let product = u.mul(&pencil)?.mul(&u.adjoint())?;
    let d = f.with_order(order).sub(&product)?;
    let mut per_degree = d.degree_norms();
    per_degree.resize(order as usize + 1, 0.0);
    Ok(ResidualTable { per_degree })
}

struct Engine<'a> {
    f: &'a MSeries,
    radix: RadixKey,
    nvars: usize,
    dim: usize,
    u: BTreeMap<u64, Matrix>,
    m: BTreeMap<u64, Matrix>,
    u00: Matrix,
    u00_inv: Matrix,
    u00_adj_inv: Matrix,
    branch: &'a Branch,
    rhs_tol: f64,
    rhs_scale: f64,
    rhs_max_defect: f64,
}

impl Engine<'_> {
    fn f_coeff(&self, idx: &MultiIndex) -> Matrix {
        if idx.total() > self.f.order() {
            Matrix::zeros(self.dim)
        } else {
            self.f.coeff_or_zero(idx)
        }
    }

    /// Keys of every `a <= target` componentwise.
    fn box_keys(&self, target: &MultiIndex) -> Vec<u64> {
        let mut digits = vec![target.j()];
        digits.extend_from_slice(target.alpha());
        let mut keys = vec![0u64];
        let mut weight = 1u64;
        for (pos, &d) in digits.iter().enumerate() {
            if pos > 0 {
                weight *= self.radix.base();
            }
            let mut next = Vec::with_capacity(keys.len() * (d as usize + 1));
            for &k in &keys {
                for v in 0..=d as u64 {
                    next.push(k + v * weight);
                }
            }
            keys = next;
        }
        keys
    }

    /// Coefficient at `target` of `U (tI + M) U*` with the current table;
    /// coefficients not yet computed count as zero. Also returns the summed
    /// size of the contributing terms, which sets the rounding scale.
    fn product_coeff(&self, target: &MultiIndex) -> (Matrix, f64) {
        let tkey = self.radix.key(target);
        let t_unit = self.radix.key(&MultiIndex::t(1, self.nvars));
        let mut acc = Matrix::zeros(self.dim);
        let mut size = 0.0;
        for a in self.box_keys(target) {
            let Some(ua) = self.u.get(&a) else { continue };
            let rest = tkey - a;
            let rest_idx = self.radix.decode(rest);
            // (tI + M) U* at `rest`
            let mut y = Matrix::zeros(self.dim);
            let mut any = false;
            if rest_idx.j() >= 1 {
                if let Some(v) = self.u.get(&(rest - t_unit)) {
                    y += &v.adjoint();
                    any = true;
                }
            }
            let x_part = rest_idx.with_j(0);
            for g in self.box_keys(&x_part) {
                if g == 0 {
                    continue;
                }
                let Some(mg) = self.m.get(&g) else { continue };
                if let Some(v) = self.u.get(&(rest - g)) {
                    y.add_product(mg, &v.adjoint());
                    any = true;
                }
            }
            if any {
                acc.add_product(ua, &y);
                size += ua.frobenius_norm() * y.frobenius_norm();
            }
        }
        (acc, size)
    }

    fn check_rhs(&mut self, rhs: &Matrix, size: f64, idx: &MultiIndex) -> Result<Matrix> {
        let defect = rhs.hermitian_defect();
        self.rhs_max_defect = self.rhs_max_defect.max(defect);
        if defect > self.rhs_tol * size.max(self.rhs_scale) {
            return Err(Error::NonHermitianRhs {
                index: idx.to_string(),
                asymmetry: defect,
            });
        }
        Ok(hermitian_part(rhs))
    }

    /// `M_alpha = U00^{-1} (F_{0,alpha} - rest) U00^{-*}`.
    fn solve_m(&mut self, alpha: &[u32]) -> Result<()> {
        let target = MultiIndex::new(0, alpha.to_vec());
        let (product, size) = self.product_coeff(&target);
        let rhs = &self.f_coeff(&target) - &product;
        let rhs = self.check_rhs(&rhs, size, &target)?;
        let m = &(&self.u00_inv * &rhs) * &self.u00_inv.adjoint();
        self.m.insert(self.radix.key(&target), hermitian_part(&m));
        Ok(())
    }

    /// `U_{j,alpha}` from `2 re(U_{j,alpha} U00*) = RHS`, matching the
    /// coefficient of `F` at `(j + 1, alpha)`.
    fn solve_u(&mut self, unknown: &MultiIndex) -> Result<()> {
        let target = unknown.with_j(unknown.j() + 1);
        let (product, size) = self.product_coeff(&target);
        let rhs = &self.f_coeff(&target) - &product;
        let half = self.check_rhs(&rhs, size, unknown)?.scale_real(0.5);
        let u = match self.branch {
            Branch::HermitianUnique => solve_sym(&self.u00, &half)?.solution,
            Branch::General { gauge } => {
                let mut lhs = half;
                if let Some(k) = gauge.get(unknown) {
                    lhs += k;
                }
                &lhs * &self.u00_adj_inv
            }
        };
        if !u.is_zero() {
            self.u.insert(self.radix.key(unknown), u);
        }
        Ok(())
    }

    fn u_series(&self, order: u32) -> MSeries {
        let mut s = MSeries::zero(self.nvars, self.dim, order);
        for (k, v) in &self.u {
            let idx = self.radix.decode(*k);
            if idx.total() <= order {
                s.insert_unchecked(idx, v.clone());
            }
        }
        s
    }

    fn m_series(&self, order: u32) -> Result<XSeries> {
        let mut s = MSeries::zero(self.nvars, self.dim, order);
        for (k, v) in &self.m {
            s.insert_unchecked(self.radix.decode(*k), v.clone());
        }
        XSeries::new(s)
    }
}

#[cfg(test)]
mod tests;
