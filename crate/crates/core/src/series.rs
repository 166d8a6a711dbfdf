//! Truncated multivariate power series in `(t, x_1, ..., x_n)` with matrix
//! coefficients.
//!
//! Truncation is by total degree `j + |alpha| <= P`. Coefficients are kept in
//! a `BTreeMap` under the graded order of [`MultiIndex`], so iteration is
//! deterministic and independent of insertion order. Exact zero matrices are
//! never stored.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_part, skew_part, Matrix, C64};

/// Exponent of `t` and exponents of `x`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    j: u32,
    alpha: Vec<u32>,
}

impl MultiIndex {
    pub fn new(j: u32, alpha: Vec<u32>) -> Self {
        MultiIndex { j, alpha }
    }

    pub fn zero(nvars: usize) -> Self {
        MultiIndex::new(0, vec![0; nvars])
    }

    /// `t^j`.
    pub fn t(j: u32, nvars: usize) -> Self {
        MultiIndex::new(j, vec![0; nvars])
    }

    /// `x_var^power`.
    pub fn x(var: usize, power: u32, nvars: usize) -> Self {
        let mut alpha = vec![0; nvars];
        alpha[var] = power;
        MultiIndex::new(0, alpha)
    }

    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn alpha(&self) -> &[u32] {
        &self.alpha
    }

    pub fn nvars(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha_total(&self) -> u32 {
        self.alpha.iter().sum()
    }

    pub fn total(&self) -> u32 {
        self.j + self.alpha_total()
    }

    pub fn is_zero(&self) -> bool {
        self.j == 0 && self.alpha.iter().all(|&a| a == 0)
    }

    pub fn is_t_free(&self) -> bool {
        self.j == 0
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex {
            j: self.j + other.j,
            alpha: self.alpha.iter().zip(&other.alpha).map(|(a, b)| a + b).collect(),
        }
    }

    /// `self - other` when `other <= self` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let j = self.j.checked_sub(other.j)?;
        let alpha = self
            .alpha
            .iter()
            .zip(&other.alpha)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()?;
        Some(MultiIndex { j, alpha })
    }

    pub fn with_j(&self, j: u32) -> MultiIndex {
        MultiIndex {
            j,
            alpha: self.alpha.clone(),
        }
    }
}

impl Ord for MultiIndex {
    /// Graded: total degree, then `j` descending, then `alpha` lexicographic.
    fn cmp(&self, other: &Self) -> Ordering {
        self.total()
            .cmp(&other.total())
            .then(other.j.cmp(&self.j))
            .then_with(|| self.alpha.cmp(&other.alpha))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {:?})", self.j, self.alpha)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// All multi-indices in `nvars` x-variables with total
/// degree at most `order`, in graded order.
pub fn indices_up_to(nvars: usize, order: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for total in 0..=order {
        for j in (0..=total).rev() {
            for alpha in compositions(total - j, nvars) {
                out.push(MultiIndex::new(j, alpha));
            }
        }
    }
    out
}

/// All `alpha` with `|alpha| = degree`, lexicographically ascending.
pub fn compositions(degree: u32, nvars: usize) -> Vec<Vec<u32>> {
    fn rec(remaining: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in 0..=remaining {
            prefix.push(a);
            rec(remaining - a, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    if nvars == 0 {
        return if degree == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    rec(degree, nvars, &mut Vec::with_capacity(nvars), &mut out);
    // rec yields ascending order already, keep it explicit
    out.sort();
    out
}

/// Truncated power series with `N x N` matrix coefficients.
#[derive(Clone, PartialEq)]
pub struct MSeries {
    nvars: usize,
    dim: usize,
    order: u32,
    coeffs: BTreeMap<MultiIndex, Matrix>,
    truncation_loss: bool,
}

impl fmt::Debug for MSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "MSeries(n={}, N={}, P={}, loss={}) {{",
            self.nvars, self.dim, self.order, self.truncation_loss
        )?;
        for (k, v) in &self.coeffs {
            writeln!(f, "  {k:?}: {v:?}")?;
        }
        write!(f, "}}")
    }
}

impl MSeries {
    pub fn zero(nvars: usize, dim: usize, order: u32) -> Self {
        MSeries {
            nvars,
            dim,
            order,
            coeffs: BTreeMap::new(),
            truncation_loss: false,
        }
    }

    pub fn constant(nvars: usize, order: u32, c: Matrix) -> Self {
        let mut s = Self::zero(nvars, c.dim(), order);
        s.insert_unchecked(MultiIndex::zero(nvars), c);
        s
    }

    pub fn monomial(nvars: usize, order: u32, index: MultiIndex, c: Matrix) -> Result<Self> {
        let mut s = Self::zero(nvars, c.dim(), order);
        s.set(index, c)?;
        Ok(s)
    }

    /// Builds a series from `(index, coefficient)` pairs; duplicate indices
    /// are summed. Terms above `order` are rejected.
    pub fn from_terms(
        nvars: usize,
        dim: usize,
        order: u32,
        terms: impl IntoIterator<Item = (MultiIndex, Matrix)>,
    ) -> Result<Self> {
        let mut s = Self::zero(nvars, dim, order);
        for (idx, c) in terms {
            s.check_index(&idx)?;
            s.check_matrix(&c)?;
            if idx.total() > order {
                return Err(Error::ShapeMismatch(format!(
                    "term {idx} exceeds truncation order {order}"
                )));
            }
            let entry = s.coeffs.entry(idx).or_insert_with(|| Matrix::zeros(dim));
            *entry += &c;
        }
        s.coeffs.retain(|_, m| !m.is_zero());
        Ok(s)
    }

    fn check_index(&self, idx: &MultiIndex) -> Result<()> {
        if idx.nvars() != self.nvars {
            return Err(Error::ShapeMismatch(format!(
                "index {idx} has {} x-variables, series has {}",
                idx.nvars(),
                self.nvars
            )));
        }
        Ok(())
    }

    fn check_matrix(&self, c: &Matrix) -> Result<()> {
        if c.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: c.dim(),
            });
        }
        if !c.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    fn check_compatible(&self, other: &MSeries) -> Result<()> {
        if self.nvars != other.nvars || self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!(
                "(n={}, N={}) vs (n={}, N={})",
                self.nvars, self.dim, other.nvars, other.dim
            )));
        }
        Ok(())
    }

    pub(crate) fn insert_unchecked(&mut self, idx: MultiIndex, c: Matrix) {
        if c.is_zero() || idx.total() > self.order {
            self.coeffs.remove(&idx);
        } else {
            self.coeffs.insert(idx, c);
        }
    }

    /// Replaces the coefficient at `idx`.
    pub fn set(&mut self, idx: MultiIndex, c: Matrix) -> Result<()> {
        self.check_index(&idx)?;
        self.check_matrix(&c)?;
        if idx.total() > self.order {
            return Err(Error::ShapeMismatch(format!(
                "index {idx} exceeds truncation order {}",
                self.order
            )));
        }
        self.insert_unchecked(idx, c);
        Ok(())
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Set when some operation dropped terms above the truncation order.
    pub fn truncation_loss(&self) -> bool {
        self.truncation_loss
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Option<&Matrix> {
        self.coeffs.get(idx)
    }

    pub fn coeff_or_zero(&self, idx: &MultiIndex) -> Matrix {
        self.coeffs.get(idx).cloned().unwrap_or_else(|| Matrix::zeros(self.dim))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Matrix)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_t_free(&self) -> bool {
        self.coeffs.keys().all(MultiIndex::is_t_free)
    }

    /// Same coefficients under a different truncation order. Raising the
    /// order asserts that the stored data is exact up to the new order.
    pub fn with_order(&self, order: u32) -> MSeries {
        let mut out = self.clone();
        out.order = order;
        let before = out.coeffs.len();
        out.coeffs.retain(|k, _| k.total() <= order);
        if out.coeffs.len() != before {
            out.truncation_loss = true;
        }
        out
    }

    pub fn add(&self, other: &MSeries) -> Result<MSeries> {
        self.combine(other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &MSeries) -> Result<MSeries> {
        self.combine(other, C64::new(-1.0, 0.0))
    }

    fn combine(&self, other: &MSeries, sign: C64) -> Result<MSeries> {
        self.check_compatible(other)?;
        let order = self.order.min(other.order);
        let mut out = MSeries::zero(self.nvars, self.dim, order);
        out.truncation_loss = self.truncation_loss || other.truncation_loss;
        for (k, v) in &self.coeffs {
            if k.total() <= order {
                out.coeffs.insert(k.clone(), v.clone());
            } else {
                out.truncation_loss = true;
            }
        }
        for (k, v) in &other.coeffs {
            if k.total() > order {
                out.truncation_loss = true;
                continue;
            }
            out.coeffs
                .entry(k.clone())
                .or_insert_with(|| Matrix::zeros(self.dim))
                .add_scaled(v, sign);
        }
        out.coeffs.retain(|_, m| !m.is_zero());
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> MSeries {
        self.map_coeffs(|m| m.scale(c))
    }

    pub fn scale_real(&self, c: f64) -> MSeries {
        self.map_coeffs(|m| m.scale_real(c))
    }

    pub fn neg(&self) -> MSeries {
        self.scale_real(-1.0)
    }

    fn map_coeffs(&self, f: impl Fn(&Matrix) -> Matrix) -> MSeries {
        let mut out = MSeries::zero(self.nvars, self.dim, self.order);
        out.truncation_loss = self.truncation_loss;
        for (k, v) in &self.coeffs {
            out.insert_unchecked(k.clone(), f(v));
        }
        out
    }

    /// Left-multiplies every coefficient by a constant matrix.
    pub fn left_mul_matrix(&self, c: &Matrix) -> MSeries {
        self.map_coeffs(|m| c * m)
    }

    /// Right-multiplies every coefficient by a constant matrix.
    pub fn right_mul_matrix(&self, c: &Matrix) -> MSeries {
        self.map_coeffs(|m| m * c)
    }

    /// Coefficientwise conjugate transpose; the series of `U*(t, x)` for
    /// real arguments.
    pub fn adjoint(&self) -> MSeries {
        self.map_coeffs(Matrix::adjoint)
    }

    /// Coefficientwise `(X + X*)/2`.
    pub fn hermitian_part(&self) -> MSeries {
        self.map_coeffs(hermitian_part)
    }

    /// Coefficientwise `(X - X*)/(2i)`.
    pub fn skew_part(&self) -> MSeries {
        self.map_coeffs(skew_part)
    }

    /// Truncated Cauchy product with non-commutative coefficient products.
    pub fn mul(&self, other: &MSeries) -> Result<MSeries> {
        self.check_compatible(other)?;
        let order = self.order.min(other.order);
        let radix = RadixKey::new(self.nvars, order)?;
        let mut acc: BTreeMap<u64, Matrix> = BTreeMap::new();
        let mut loss = self.truncation_loss || other.truncation_loss;

        let lhs: Vec<(u32, u64, &Matrix)> = self
            .coeffs
            .iter()
            .filter_map(|(k, v)| {
                if k.total() > order {
                    loss = true;
                    None
                } else {
                    Some((k.total(), radix.key(k), v))
                }
            })
            .collect();
        let rhs: Vec<(u32, u64, &Matrix)> = other
            .coeffs
            .iter()
            .filter_map(|(k, v)| {
                if k.total() > order {
                    loss = true;
                    None
                } else {
                    Some((k.total(), radix.key(k), v))
                }
            })
            .collect();

        for &(ta, ka, a) in &lhs {
            for &(tb, kb, b) in &rhs {
                if ta + tb > order {
                    // rhs is graded, later terms are higher still
                    loss = true;
                    break;
                }
                acc.entry(ka + kb)
                    .or_insert_with(|| Matrix::zeros(self.dim))
                    .add_product(a, b);
            }
        }

        let mut out = MSeries::zero(self.nvars, self.dim, order);
        out.truncation_loss = loss;
        for (k, v) in acc {
            out.insert_unchecked(radix.decode(k), v);
        }
        Ok(out)
    }

    /// `d/dt`. The result has order `P - 1`: its top coefficients would
    /// need terms above `P`.
    pub fn dt(&self) -> MSeries {
        let mut out = MSeries::zero(self.nvars, self.dim, self.order.saturating_sub(1));
        out.truncation_loss = self.truncation_loss;
        for (k, v) in &self.coeffs {
            if k.j > 0 {
                out.insert_unchecked(k.with_j(k.j - 1), v.scale_real(k.j as f64));
            }
        }
        out
    }

    /// `int_0^t ... ds`. Keeps order `P`; terms pushed above it are dropped
    /// and flagged.
    pub fn integrate_t(&self) -> MSeries {
        let mut out = MSeries::zero(self.nvars, self.dim, self.order);
        out.truncation_loss = self.truncation_loss;
        for (k, v) in &self.coeffs {
            let idx = k.with_j(k.j + 1);
            if idx.total() > self.order {
                out.truncation_loss = true;
            } else {
                out.insert_unchecked(idx, v.scale_real(1.0 / (k.j as f64 + 1.0)));
            }
        }
        out
    }

    /// Division by `t`; the `j = 0` layer must vanish below
    /// `1e-11 * max_norm()`. The result has order `P - 1`.
    pub fn divide_by_t(&self) -> Result<MSeries> {
        let scale = self.max_norm();
        let tol = 1e-11 * scale;
        let constant_layer = self
            .coeffs
            .iter()
            .filter(|(k, _)| k.j == 0)
            .map(|(_, v)| v.operator_norm())
            .fold(0.0, f64::max);
        if constant_layer > tol {
            return Err(Error::NonVanishingConstantLayer {
                norm: constant_layer,
                tolerance: tol,
            });
        }
        let mut out = MSeries::zero(self.nvars, self.dim, self.order.saturating_sub(1));
        out.truncation_loss = self.truncation_loss;
        for (k, v) in &self.coeffs {
            if k.j > 0 {
                out.insert_unchecked(k.with_j(k.j - 1), v.clone());
            }
        }
        Ok(out)
    }

    /// Evaluates the polynomial at real `(t, x)`.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Matrix> {
        if x.len() != self.nvars {
            return Err(Error::ShapeMismatch(format!(
                "evaluation point has {} x-coordinates, series has {}",
                x.len(),
                self.nvars
            )));
        }
        let p = self.order as usize;
        let t_pow: Vec<f64> = powers(t, p);
        let x_pow: Vec<Vec<f64>> = x.iter().map(|&xi| powers(xi, p)).collect();
        // accumulate degree by degree, lowest first
        let mut out = Matrix::zeros(self.dim);
        for (k, v) in &self.coeffs {
            let mut w = t_pow[k.j as usize];
            for (i, &a) in k.alpha.iter().enumerate() {
                w *= x_pow[i][a as usize];
            }
            out.add_scaled(v, C64::new(w, 0.0));
        }
        Ok(out)
    }

    /// Coefficients with `t`-exponent `j`, as a `t`-free series.
    pub fn t_layer(&self, j: u32) -> XSeries {
        let mut out = MSeries::zero(self.nvars, self.dim, self.order);
        out.truncation_loss = self.truncation_loss;
        for (k, v) in &self.coeffs {
            if k.j == j {
                out.insert_unchecked(k.with_j(0), v.clone());
            }
        }
        XSeries(out)
    }

    /// Largest coefficient operator norm.
    pub fn max_norm(&self) -> f64 {
        self.coeffs.values().map(linalg::operator_norm).fold(0.0, f64::max)
    }

    /// Largest coefficient operator norm for each total degree `0..=P`.
    pub fn degree_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.order as usize + 1];
        for (k, v) in &self.coeffs {
            let d = k.total() as usize;
            out[d] = out[d].max(v.operator_norm());
        }
        out
    }

    /// Largest `|X - X*|` over the coefficients.
    pub fn hermitian_defect(&self) -> f64 {
        self.coeffs.values().map(Matrix::hermitian_defect).fold(0.0, f64::max)
    }

    /// Multiplicative inverse by degree-triangular recursion; requires an
    /// invertible constant term.
    pub fn inverse(&self) -> Result<MSeries> {
        let c0 = self.coeff_or_zero(&MultiIndex::zero(self.nvars));
        let inv0 = linalg::inverse(&c0)?;
        let mut out = MSeries::zero(self.nvars, self.dim, self.order);
        out.truncation_loss = self.truncation_loss;
        out.insert_unchecked(MultiIndex::zero(self.nvars), inv0.clone());
        for idx in indices_up_to(self.nvars, self.order).into_iter().skip(1) {
            // V_d = -c0^{-1} sum_{a != 0, a <= d} U_a V_{d-a}
            let mut acc = Matrix::zeros(self.dim);
            for (a, ua) in &self.coeffs {
                if a.is_zero() {
                    continue;
                }
                if let Some(rest) = idx.checked_sub(a) {
                    if let Some(v) = out.coeffs.get(&rest) {
                        acc.add_product(ua, v);
                    }
                }
            }
            out.insert_unchecked(idx, -&(&inv0 * &acc));
        }
        Ok(out)
    }

    /// `t * I + self` for a `t`-free series.
    pub fn pencil(m: &XSeries) -> MSeries {
        let mut out = m.0.clone();
        let idx = MultiIndex::t(1, m.nvars);
        if m.order >= 1 {
            let mut c = out.coeff_or_zero(&idx);
            c += &Matrix::identity(m.dim);
            out.insert_unchecked(idx, c);
        }
        out
    }
}

fn powers(x: f64, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p + 1);
    let mut acc = 1.0;
    for _ in 0..=p {
        out.push(acc);
        acc *= x;
    }
    out
}

/// Mixed-radix encoding of multi-indices with total degree at most `order`.
/// Keys add when indices add without exceeding the order.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RadixKey {
    nvars: usize,
    base: u64,
}

impl RadixKey {
    pub(crate) fn new(nvars: usize, order: u32) -> Result<Self> {
        let base = order as u64 + 1;
        if base.checked_pow(nvars as u32 + 1).is_none() {
            return Err(Error::InvalidArgument(format!(
                "index space of order {order} in {} variables is too large",
                nvars + 1
            )));
        }
        Ok(RadixKey { nvars, base })
    }

    pub(crate) fn base(&self) -> u64 {
        self.base
    }

    pub(crate) fn key(&self, idx: &MultiIndex) -> u64 {
        let mut k = 0u64;
        for &a in idx.alpha.iter().rev() {
            k = k * self.base + a as u64;
        }
        k * self.base + idx.j as u64
    }

    pub(crate) fn decode(&self, mut k: u64) -> MultiIndex {
        let j = (k % self.base) as u32;
        k /= self.base;
        let mut alpha = Vec::with_capacity(self.nvars);
        for _ in 0..self.nvars {
            alpha.push((k % self.base) as u32);
            k /= self.base;
        }
        MultiIndex::new(j, alpha)
    }
}

/// A `t`-free series, used for `M(x)` and remainders `R(x)`.
#[derive(Clone, PartialEq)]
pub struct XSeries(MSeries);

impl fmt::Debug for XSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X")?;
        fmt::Debug::fmt(&self.0, f)
    }
}

impl XSeries {
    pub fn new(series: MSeries) -> Result<Self> {
        if let Some((k, _)) = series.iter().find(|(k, _)| !k.is_t_free()) {
            return Err(Error::ShapeMismatch(format!(
                "x-series has a t-dependent term at {k}"
            )));
        }
        Ok(XSeries(series))
    }

    pub fn zero(nvars: usize, dim: usize, order: u32) -> Self {
        XSeries(MSeries::zero(nvars, dim, order))
    }

    pub fn as_series(&self) -> &MSeries {
        &self.0
    }

    pub fn into_series(self) -> MSeries {
        self.0
    }

    /// True when every coefficient is Hermitian within `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.0.hermitian_defect() <= tol
    }
}

impl Deref for XSeries {
    type Target = MSeries;
    fn deref(&self) -> &MSeries {
        &self.0
    }
}

impl From<XSeries> for MSeries {
    fn from(x: XSeries) -> MSeries {
        x.0
    }
}
