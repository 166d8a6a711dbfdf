//! Division by the Hermitian pencil `P(t, B) = t I + B`, `|B| < 1`.
//!
//! For `G` analytic and bounded on a strip `|Im t| < eps_max`, the Cauchy
//! integrals
//!
//! ```text
//! R    = (2 pi i)^{-1} \oint G(s) P(s)^{-1} ds
//! Q(t) = (2 pi i)^{-1} \oint G(s) P(s)^{-1} (s - t)^{-1} ds
//! ```
//!
//! give `G(t) = Q(t) P(t) + R`. `R` uses the boundary of `[-2, 2] x [-eps,
//! eps]`, which encloses the spectrum of `-B`. `Q` uses `[-4, 4] x [-eps,
//! eps]`, which encloses the spectrum and every `t` in `(-2, 2)`; the same
//! nodes then serve all evaluation points.

mod dyadic;
pub mod quadrature;

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigendecomposition, HermitianEigen, Matrix, C64, HERMITIAN_TOL};
use crate::series::XSeries;

pub use dyadic::{smooth_divide_dyadic, BandReport, DyadicOptions, DyadicResult, UniformGrid};
pub use quadrature::Rule;

/// Minimum panel density (per unit contour length).
pub const MIN_PANELS: usize = 8;
/// Default panel density.
pub const DEFAULT_PANELS: usize = 32;
/// Half-width of the `Q` rectangle.
pub const Q_HALF_WIDTH: f64 = 4.0;
/// Half-width of the `R` rectangle.
pub const R_HALF_WIDTH: f64 = 2.0;
/// `P(s)` counts as singular when `min_j |s + beta_j|` is below this.
pub const SPECTRUM_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Pencil {
    b: Matrix,
    eig: HermitianEigen,
    norm: f64,
}

impl Pencil {
    pub fn new(b: Matrix) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::NonFinite);
        }
        b.check_hermitian(HERMITIAN_TOL)?;
        let eig = hermitian_eigendecomposition(&b)?;
        let norm = eig.max_abs_eigenvalue();
        if norm >= 1.0 {
            return Err(Error::PencilNorm { norm });
        }
        Ok(Pencil { b, eig, norm })
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `t I + B`.
    pub fn eval(&self, t: C64) -> Matrix {
        let mut p = self.b.clone();
        p += &Matrix::scalar(self.dim(), t);
        p
    }

    /// `(t I + B)^{-1}` from the eigendecomposition of `B`.
    pub fn resolvent(&self, t: C64) -> Result<Matrix> {
        let dist = self.spectral_distance(t);
        if dist < SPECTRUM_FLOOR {
            return Err(Error::NearSpectrum { re: t.re, im: t.im });
        }
        Ok(self.eig.map_spectrum(|beta| 1.0 / (t + beta)))
    }

    /// `min_j |t + beta_j|`, which equals `1 / |P(t)^{-1}|`.
    pub fn spectral_distance(&self, t: C64) -> f64 {
        self.eig
            .eigenvalues
            .iter()
            .map(|&beta| (t + beta).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn transpose(&self) -> Result<Pencil> {
        Pencil::new(self.b.transpose())
    }
}

pub type Sampler = Arc<dyn Fn(C64) -> Matrix + Send + Sync>;

#[derive(Clone)]
pub enum StripKind {
    /// `G(t) = sum_k G_k t^k`.
    Polynomial(Vec<Matrix>),
    /// Trusted to be analytic and bounded on `|Im t| < eps_max`.
    Sampler {
        f: Sampler,
        eps_max: f64,
        bound: Option<f64>,
        concurrent: bool,
    },
}

#[derive(Clone)]
pub struct StripFunction {
    dim: usize,
    kind: StripKind,
}

impl std::fmt::Debug for StripFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            StripKind::Polynomial(c) => write!(f, "Polynomial(N={}, degree={})", self.dim, c.len() - 1),
            StripKind::Sampler { eps_max, bound, .. } => {
                write!(f, "Sampler(N={}, eps_max={eps_max}, bound={bound:?})", self.dim)
            }
        }
    }
}

impl StripFunction {
    pub fn polynomial(coeffs: Vec<Matrix>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::InvalidArgument("empty polynomial".into()));
        };
        let dim = first.dim();
        for c in &coeffs {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.dim(),
                });
            }
            if !c.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(StripFunction {
            dim,
            kind: StripKind::Polynomial(coeffs),
        })
    }

    pub fn sampler(dim: usize, eps_max: f64, f: impl Fn(C64) -> Matrix + Send + Sync + 'static) -> Self {
        StripFunction {
            dim,
            kind: StripKind::Sampler {
                f: Arc::new(f),
                eps_max,
                bound: None,
                concurrent: true,
            },
        }
    }

    /// `g(t) I` for a scalar function `g`.
    pub fn scalar(dim: usize, eps_max: f64, g: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        Self::sampler(dim, eps_max, move |s| Matrix::scalar(dim, g(s)))
    }

    /// Declares `sup |G|` on the strip; used as `M_G` instead of the
    /// measured maximum.
    pub fn with_bound(mut self, m: f64) -> Self {
        if let StripKind::Sampler { bound, .. } = &mut self.kind {
            *bound = Some(m);
        }
        self
    }

    /// Marks the sampler as unsafe for concurrent calls.
    pub fn serial(mut self) -> Self {
        if let StripKind::Sampler { concurrent, .. } = &mut self.kind {
            *concurrent = false;
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &StripKind {
        &self.kind
    }

    pub fn eps_max(&self) -> f64 {
        match &self.kind {
            StripKind::Polynomial(_) => f64::INFINITY,
            StripKind::Sampler { eps_max, .. } => *eps_max,
        }
    }

    pub fn declared_bound(&self) -> Option<f64> {
        match &self.kind {
            StripKind::Polynomial(_) => None,
            StripKind::Sampler { bound, .. } => *bound,
        }
    }

    pub fn is_concurrent(&self) -> bool {
        match &self.kind {
            StripKind::Polynomial(_) => true,
            StripKind::Sampler { concurrent, .. } => *concurrent,
        }
    }

    pub fn eval(&self, s: C64) -> Matrix {
        match &self.kind {
            StripKind::Polynomial(coeffs) => {
                let mut acc = Matrix::zeros(self.dim);
                for c in coeffs.iter().rev() {
                    acc = acc.scale(s);
                    acc += c;
                }
                acc
            }
            StripKind::Sampler { f, .. } => f(s),
        }
    }

    /// `t -> G(t)^T`.
    pub fn transposed(&self) -> StripFunction {
        let kind = match &self.kind {
            StripKind::Polynomial(c) => StripKind::Polynomial(c.iter().map(Matrix::transpose).collect()),
            StripKind::Sampler {
                f,
                eps_max,
                bound,
                concurrent,
            } => {
                let f = f.clone();
                StripKind::Sampler {
                    f: Arc::new(move |s| f(s).transpose()),
                    eps_max: *eps_max,
                    bound: *bound,
                    concurrent: *concurrent,
                }
            }
        };
        StripFunction { dim: self.dim, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisionOptions {
    /// Panels per unit contour length (before the `2 / eps` floor).
    pub panels: usize,
    pub rule: Rule,
}

impl Default for DivisionOptions {
    fn default() -> Self {
        DivisionOptions {
            panels: DEFAULT_PANELS,
            rule: Rule::GaussLegendre,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DivisionResult {
    pub t_points: Vec<f64>,
    pub q_values: Vec<Matrix>,
    pub r: Matrix,
    pub eps: f64,
    /// Panel density actually used.
    pub quadrature_panels: usize,
    /// `max_t |G(t) - Q(t) P(t) - R|` over `t_points`.
    pub residual_max: f64,
    /// `M_G`: the declared bound, or the largest `|G|` seen on the contours
    /// and at the evaluation points.
    pub m_g: f64,
    pub sup_q: f64,
    pub norm_r: f64,
    /// `sup_t |Q(t)| eps^2 / M_G`.
    pub est_q: f64,
    /// `|R| eps / M_G`.
    pub est_r: f64,
    /// Largest `|P(s)^{-1}| * eps` over the quadrature nodes; at most one.
    pub resolvent_ratio: f64,
}

impl DivisionResult {
    pub fn q_at(&self, t: f64) -> Option<&Matrix> {
        self.t_points.iter().position(|&x| x == t).map(|i| &self.q_values[i])
    }
}

/// `contour_divide_with` using Gauss-Legendre panels.
pub fn contour_divide(
    g: &StripFunction,
    pencil: &Pencil,
    eps: f64,
    t_points: &[f64],
    panels: usize,
) -> Result<DivisionResult> {
    contour_divide_with(
        g,
        pencil,
        eps,
        t_points,
        &DivisionOptions {
            panels,
            rule: Rule::GaussLegendre,
        },
    )
}

/// `Q` at `t_points` and `R` with `G = Q P + R`.
pub fn contour_divide_with(
    g: &StripFunction,
    pencil: &Pencil,
    eps: f64,
    t_points: &[f64],
    opts: &DivisionOptions,
) -> Result<DivisionResult> {
    if g.dim() != pencil.dim() {
        return Err(Error::DimensionMismatch {
            expected: pencil.dim(),
            found: g.dim(),
        });
    }
    let eps_cap = g.eps_max().min(1.0);
    if !(eps > 0.0 && eps <= eps_cap) {
        return Err(Error::EpsOutOfRange { eps, max: eps_cap });
    }
    if opts.panels < MIN_PANELS {
        return Err(Error::TooFewPanels {
            panels: opts.panels,
            min: MIN_PANELS,
        });
    }
    for &t in t_points {
        if !(t.is_finite() && t.abs() < R_HALF_WIDTH) {
            return Err(Error::PointOutsideContour { t });
        }
    }
    let density = opts.panels.max((2.0 / eps).ceil() as usize);
    let r_nodes = quadrature::rectangle(-R_HALF_WIDTH, R_HALF_WIDTH, eps, density, opts.rule);
    let q_nodes = quadrature::rectangle(-Q_HALF_WIDTH, Q_HALF_WIDTH, eps, density, opts.rule);
    let parallel = g.is_concurrent();

    let r_vals = integrand(g, pencil, &r_nodes, eps, parallel)?;
    let q_vals = integrand(g, pencil, &q_nodes, eps, parallel)?;

    let scale = C64::new(0.0, -1.0 / (2.0 * PI));
    let mut r = Matrix::zeros(g.dim());
    for (node, v) in r_nodes.iter().zip(&r_vals) {
        r.add_scaled(&v.h, node.w);
    }
    let r = r.scale(scale);

    let q_at = |t: f64| {
        let mut q = Matrix::zeros(g.dim());
        for (node, v) in q_nodes.iter().zip(&q_vals) {
            q.add_scaled(&v.h, node.w / (node.s - t));
        }
        let q = q.scale(scale);
        let gt = g.eval(C64::new(t, 0.0));
        let resid = &(&gt - &(&q * &pencil.eval(C64::new(t, 0.0)))) - &r;
        (q, resid.operator_norm(), gt.operator_norm())
    };
    let per_t: Vec<(Matrix, f64, f64)> = if parallel {
        t_points.par_iter().map(|&t| q_at(t)).collect()
    } else {
        t_points.iter().map(|&t| q_at(t)).collect()
    };

    let measured = r_vals
        .iter()
        .chain(&q_vals)
        .map(|v| v.g_norm)
        .chain(per_t.iter().map(|p| p.2))
        .fold(0.0, f64::max);
    let m_g = g.declared_bound().unwrap_or(measured);
    let resolvent_ratio = r_vals
        .iter()
        .chain(&q_vals)
        .map(|v| v.resolvent_norm * eps)
        .fold(0.0, f64::max);
    let residual_max = per_t.iter().map(|p| p.1).fold(0.0, f64::max);
    let sup_q = per_t.iter().map(|p| p.0.operator_norm()).fold(0.0, f64::max);
    let norm_r = r.operator_norm();
    let (est_q, est_r) = if m_g > 0.0 {
        (sup_q * eps * eps / m_g, norm_r * eps / m_g)
    } else {
        (0.0, 0.0)
    };
    Ok(DivisionResult {
        t_points: t_points.to_vec(),
        q_values: per_t.into_iter().map(|p| p.0).collect(),
        r,
        eps,
        quadrature_panels: density,
        residual_max,
        m_g,
        sup_q,
        norm_r,
        est_q,
        est_r,
        resolvent_ratio,
    })
}

struct NodeValue {
    h: Matrix,
    g_norm: f64,
    resolvent_norm: f64,
}

/// `G(s) P(s)^{-1}` at every node.
fn integrand(
    g: &StripFunction,
    pencil: &Pencil,
    nodes: &[quadrature::Node],
    eps: f64,
    parallel: bool,
) -> Result<Vec<NodeValue>> {
    let eval = |node: &quadrature::Node| -> Result<NodeValue> {
        let gs = g.eval(node.s);
        if gs.dim() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                found: gs.dim(),
            });
        }
        if !gs.is_finite() {
            return Err(Error::NonFinite);
        }
        let res = pencil.resolvent(node.s)?;
        let resolvent_norm = 1.0 / pencil.spectral_distance(node.s);
        if resolvent_norm > 1.0 / eps + 1e-9 {
            return Err(Error::NearSpectrum {
                re: node.s.re,
                im: node.s.im,
            });
        }
        Ok(NodeValue {
            h: &gs * &res,
            g_norm: gs.operator_norm(),
            resolvent_norm,
        })
    };
    if parallel {
        nodes.par_iter().map(eval).collect()
    } else {
        nodes.iter().map(eval).collect()
    }
}

/// Exact right division of `G(t) = sum_k G_k t^k` by `t I + B`. A constant
/// `G` gives the zero quotient `[0]`.
pub fn polynomial_divide(coeffs: &[Matrix], pencil: &Pencil) -> Result<(Vec<Matrix>, Matrix)> {
    let dim = pencil.dim();
    for c in coeffs {
        if c.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.dim(),
            });
        }
    }
    let Some(d) = coeffs.len().checked_sub(1) else {
        return Ok((vec![Matrix::zeros(dim)], Matrix::zeros(dim)));
    };
    if d == 0 {
        return Ok((vec![Matrix::zeros(dim)], coeffs[0].clone()));
    }
    // Q_{d-1} = G_d, Q_{k-1} = G_k - Q_k B, R = G_0 - Q_0 B
    let b = pencil.b();
    let mut q = vec![Matrix::zeros(dim); d];
    q[d - 1] = coeffs[d].clone();
    for k in (1..d).rev() {
        q[k - 1] = &coeffs[k] - &(&q[k] * b);
    }
    let r = &coeffs[0] - &(&q[0] * b);
    Ok((q, r))
}

/// Left division `G = P Q + R` via `G^T = Q^T P^T + R^T`.
pub fn contour_divide_left(
    g: &StripFunction,
    pencil: &Pencil,
    eps: f64,
    t_points: &[f64],
    opts: &DivisionOptions,
) -> Result<DivisionResult> {
    let mut res = contour_divide_with(&g.transposed(), &pencil.transpose()?, eps, t_points, opts)?;
    res.q_values = res.q_values.iter().map(Matrix::transpose).collect();
    res.r = res.r.transpose();
    Ok(res)
}

/// Division by `t I + M(x)` at each of the given `x`-slices.
pub fn divide_slices(
    g: impl Fn(&[f64]) -> StripFunction,
    m: &XSeries,
    slices: &[Vec<f64>],
    eps: f64,
    t_points: &[f64],
    opts: &DivisionOptions,
) -> Result<Vec<DivisionResult>> {
    slices
        .iter()
        .map(|x| {
            let b = crate::linalg::hermitian_part(&m.eval(0.0, x)?);
            contour_divide_with(&g(x), &Pencil::new(b)?, eps, t_points, opts)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub function_id: String,
    pub eps: f64,
    pub sup_norm_q: f64,
    pub norm_r: f64,
    pub est_q: f64,
    pub est_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    pub rows: Vec<EstimateRow>,
    pub max_est_q: f64,
    pub max_est_r: f64,
}

/// Runs `contour_divide` over every `(G, eps)` pair and tabulates the scaled
/// norms `sup |Q| eps^2 / M_G` and `|R| eps / M_G`.
pub fn estimate_report(
    family: &[(String, StripFunction)],
    pencil: &Pencil,
    eps_list: &[f64],
    t_points: &[f64],
    panels: usize,
) -> Result<EstimateTable> {
    let mut rows = Vec::new();
    for (id, g) in family {
        for &eps in eps_list {
            let r = contour_divide(g, pencil, eps, t_points, panels)?;
            rows.push(EstimateRow {
                function_id: id.clone(),
                eps,
                sup_norm_q: r.sup_q,
                norm_r: r.norm_r,
                est_q: r.est_q,
                est_r: r.est_r,
            });
        }
    }
    let max_est_q = rows.iter().map(|r| r.est_q).fold(0.0, f64::max);
    let max_est_r = rows.iter().map(|r| r.est_r).fold(0.0, f64::max);
    Ok(EstimateTable {
        rows,
        max_est_q,
        max_est_r,
    })
}

/// `n` evenly spaced points strictly inside `(-a, a)`.
pub fn interior_points(a: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| -a + a * (2.0 * k as f64 + 1.0) / n as f64)
        .collect()
}
