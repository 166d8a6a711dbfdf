//! Division of a sampled smooth, rapidly decaying `G` by splitting its
//! spectrum into dyadic bands.
//!
//! Band `j` keeps the frequencies weighted by `psi(2^-j tau) - psi(2^(1-j)
//! tau)` (band 0 by `psi(tau)`), so its trigonometric interpolant is entire
//! and of size `O(1)` on `|Im s| <= 2^-j`. Each band is divided with
//! `contour_divide` at `eps_j = 2^-j`; the quotients and remainders are
//! summed.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::FftPlanner;

use super::{contour_divide, Pencil, StripFunction};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, C64};

/// Largest supported band index.
pub const MAX_BANDS: usize = 12;

/// Points `t0 + m dt`, `m = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl UniformGrid {
    /// `n` points covering `[-half_width, half_width)`.
    pub fn symmetric(half_width: f64, n: usize) -> Self {
        UniformGrid {
            t0: -half_width,
            dt: 2.0 * half_width / n as f64,
            n,
        }
    }

    pub fn point(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.point(m)).collect()
    }

    pub fn length(&self) -> f64 {
        self.dt * self.n as f64
    }

    /// Angular frequency of DFT bin `k`.
    fn tau(&self, k: usize) -> f64 {
        let dtau = 2.0 * PI / self.length();
        if k <= self.n / 2 {
            k as f64 * dtau
        } else {
            -((self.n - k) as f64) * dtau
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicOptions {
    /// Highest band index `J`.
    pub bands: usize,
    /// Panel density handed to `contour_divide`.
    pub panels: usize,
    /// Relative size allowed at the grid edges and the highest frequencies.
    pub decay_tol: f64,
    /// Bands whose coefficient mass is below this fraction of the total are
    /// rounding noise and are not divided.
    pub noise_floor: f64,
}

impl Default for DyadicOptions {
    fn default() -> Self {
        DyadicOptions {
            bands: 8,
            panels: 32,
            decay_tol: 1e-10,
            noise_floor: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub band: usize,
    pub eps: f64,
    /// `sum_k |c_k|_F` over the band's Fourier coefficients; bounds the band
    /// on the real line.
    pub mass: f64,
    pub skipped: bool,
    pub q_sup: f64,
    pub r_norm: f64,
    /// Quadrature residual of the band's own division.
    pub band_residual: f64,
    /// `sup_grid |G - sum_{i <= band} (Q_i P + R_i)|`.
    pub cumulative_residual: f64,
}

#[derive(Debug, Clone)]
pub struct DyadicResult {
    pub grid: UniformGrid,
    pub q: Vec<Matrix>,
    pub r: Matrix,
    pub bands: Vec<BandReport>,
    pub residual_max: f64,
    pub m_g: f64,
}

/// Quintic smoothstep cutoff: 1 on `[-1, 1]`, 0 outside `[-2, 2]`.
pub fn psi(tau: f64) -> f64 {
    let a = tau.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let x = a - 1.0;
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

fn band_weight(j: usize, tau: f64) -> f64 {
    if j == 0 {
        psi(tau)
    } else {
        let s = 2f64.powi(-(j as i32));
        psi(s * tau) - psi(2.0 * s * tau)
    }
}

/// Fourier coefficients `c_k` with `G(t) = sum_k c_k exp(i tau_k (t - t0))`.
fn spectrum(samples: &[Matrix], dim: usize) -> Vec<Matrix> {
    let n = samples.len();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut out = vec![Matrix::zeros(dim); n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for a in 0..dim {
        for b in 0..dim {
            for (m, s) in samples.iter().enumerate() {
                buf[m] = s[(a, b)];
            }
            fft.process(&mut buf);
            for (k, c) in out.iter_mut().enumerate() {
                c[(a, b)] = buf[k] / n as f64;
            }
        }
    }
    out
}

/// Grid samples from Fourier coefficients.
fn synthesize(coeffs: &[Matrix], dim: usize) -> Vec<Matrix> {
    let n = coeffs.len();
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let mut out = vec![Matrix::zeros(dim); n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for a in 0..dim {
        for b in 0..dim {
            for (k, c) in coeffs.iter().enumerate() {
                buf[k] = c[(a, b)];
            }
            fft.process(&mut buf);
            for (m, s) in out.iter_mut().enumerate() {
                s[(a, b)] = buf[m];
            }
        }
    }
    out
}

/// A band as an entire function: contiguous runs of nonnegative and negative
/// frequencies, evaluated by the exponential recurrence.
struct Band {
    dim: usize,
    t0: f64,
    dtau: f64,
    /// `(first bin, coefficients)` for `tau = +k dtau`.
    pos: (usize, Vec<Matrix>),
    /// `(first bin, coefficients)` for `tau = -k dtau`.
    neg: (usize, Vec<Matrix>),
}

impl Band {
    fn eval(&self, s: C64) -> Matrix {
        let z = s - self.t0;
        let mut acc = Matrix::zeros(self.dim);
        for (sign, (first, coeffs)) in [(1.0, &self.pos), (-1.0, &self.neg)] {
            if coeffs.is_empty() {
                continue;
            }
            let step = (C64::new(0.0, sign * self.dtau) * z).exp();
            let mut e = (C64::new(0.0, sign * self.dtau * *first as f64) * z).exp();
            for c in coeffs {
                acc.add_scaled(c, e);
                e *= step;
            }
        }
        acc
    }
}

fn build_band(grid: &UniformGrid, coeffs: &[Matrix], dim: usize) -> Band {
    let n = grid.n;
    let run = |ks: Vec<usize>, map: &dyn Fn(usize) -> usize| -> (usize, Vec<Matrix>) {
        let nz: Vec<usize> = ks.into_iter().filter(|&k| !coeffs[map(k)].is_zero()).collect();
        match (nz.first(), nz.last()) {
            (Some(&lo), Some(&hi)) => (lo, (lo..=hi).map(|k| coeffs[map(k)].clone()).collect()),
            _ => (0, Vec::new()),
        }
    };
    let pos = run((0..=n / 2 - 1).collect(), &|k| k);
    let neg = run((1..=n / 2).collect(), &|k| n - k);
    Band {
        dim,
        t0: grid.t0,
        dtau: 2.0 * PI / grid.length(),
        pos,
        neg,
    }
}

fn mass(coeffs: &[Matrix]) -> f64 {
    coeffs.iter().map(Matrix::frobenius_norm).sum()
}

/// Divides sampled `G` by `t I + B` band by band.
pub fn smooth_divide_dyadic(
    grid: &UniformGrid,
    samples: &[Matrix],
    pencil: &Pencil,
    opts: &DyadicOptions,
) -> Result<DyadicResult> {
    let n = grid.n;
    let dim = pencil.dim();
    if samples.len() != n || n < 64 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "need an even number (>= 64) of samples matching the grid, got {} for n = {n}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|m| m.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    if samples.iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFinite);
    }
    if opts.bands > MAX_BANDS {
        return Err(Error::InvalidArgument(format!(
            "at most {MAX_BANDS} bands, got {}",
            opts.bands
        )));
    }
    if grid.t0 > -R_EDGE || grid.point(n - 1) < R_EDGE {
        return Err(Error::InvalidArgument(format!(
            "grid must cover [-{R_EDGE}, {R_EDGE}]"
        )));
    }

    let norms: Vec<f64> = samples.iter().map(Matrix::operator_norm).collect();
    let m_g = norms.iter().copied().fold(0.0, f64::max);
    let edge = (n / 32).max(1);
    let edge_max = norms[..edge]
        .iter()
        .chain(&norms[n - edge..])
        .copied()
        .fold(0.0, f64::max);
    if edge_max > opts.decay_tol * m_g {
        return Err(Error::InsufficientDecay {
            what: "samples at the grid edge",
            value: edge_max / m_g,
            tolerance: opts.decay_tol,
        });
    }

    let coeffs = spectrum(samples, dim);
    let coeff_max = coeffs.iter().map(Matrix::frobenius_norm).fold(0.0, f64::max);
    let high = coeffs[n / 2 - edge..n / 2 + edge]
        .iter()
        .map(Matrix::frobenius_norm)
        .fold(0.0, f64::max);
    if high > opts.decay_tol * coeff_max {
        return Err(Error::InsufficientDecay {
            what: "Fourier coefficients near the Nyquist frequency",
            value: high / coeff_max,
            tolerance: opts.decay_tol,
        });
    }
    let total_mass = mass(&coeffs);

    let band_coeffs: Vec<Vec<Matrix>> = (0..=opts.bands)
        .map(|j| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let w = if k == n / 2 { 0.0 } else { band_weight(j, grid.tau(k)) };
                    if w == 0.0 {
                        Matrix::zeros(dim)
                    } else {
                        c.scale_real(w)
                    }
                })
                .collect()
        })
        .collect();
    let masses: Vec<f64> = band_coeffs.iter().map(|b| mass(b)).collect();
    if opts.bands >= 1 {
        let (last, prev) = (masses[opts.bands], masses[opts.bands - 1]);
        if last > prev && last > 1e-8 * total_mass {
            return Err(Error::BandsNotDecaying {
                band: opts.bands,
                norm: last,
                previous: prev,
            });
        }
    }

    let points = grid.points();
    let inner: Vec<usize> = (0..n).filter(|&m| points[m].abs() < R_EDGE).collect();
    let inner_t: Vec<f64> = inner.iter().map(|&m| points[m]).collect();
    let pencils: Vec<Matrix> = points.iter().map(|&t| pencil.eval(C64::new(t, 0.0))).collect();

    let mut q = vec![Matrix::zeros(dim); n];
    let mut r = Matrix::zeros(dim);
    let mut reports = Vec::with_capacity(opts.bands + 1);
    for (j, bc) in band_coeffs.iter().enumerate() {
        let eps = 2f64.powi(-(j as i32));
        let skipped = masses[j] <= opts.noise_floor * total_mass;
        let mut report = BandReport {
            band: j,
            eps,
            mass: masses[j],
            skipped,
            q_sup: 0.0,
            r_norm: 0.0,
            band_residual: 0.0,
            cumulative_residual: 0.0,
        };
        if !skipped {
            let band = Arc::new(build_band(grid, bc, dim));
            let g = StripFunction::sampler(dim, 1.0, move |s| band.eval(s));
            let res = contour_divide(&g, pencil, eps, &inner_t, opts.panels)?;
            let on_grid = synthesize(bc, dim);
            let mut qj = vec![Matrix::zeros(dim); n];
            for (i, &m) in inner.iter().enumerate() {
                qj[m] = res.q_values[i].clone();
            }
            for m in (0..n).filter(|&m| points[m].abs() >= R_EDGE) {
                // away from the spectrum Q = (G - R) P^{-1} exactly
                let inv = pencil.resolvent(C64::new(points[m], 0.0))?;
                qj[m] = &(&on_grid[m] - &res.r) * &inv;
            }
            for (acc, v) in q.iter_mut().zip(&qj) {
                *acc += v;
            }
            r += &res.r;
            report.q_sup = qj.iter().map(Matrix::operator_norm).fold(0.0, f64::max);
            report.r_norm = res.r.operator_norm();
            report.band_residual = res.residual_max;
        }
        report.cumulative_residual = residual(samples, &q, &r, &pencils);
        reports.push(report);
    }
    let residual_max = reports.last().map_or(0.0, |b| b.cumulative_residual);
    Ok(DyadicResult {
        grid: *grid,
        q,
        r,
        bands: reports,
        residual_max,
        m_g,
    })
}

/// Points with `|t| < R_EDGE` use the contour quotient.
const R_EDGE: f64 = super::R_HALF_WIDTH;

fn residual(samples: &[Matrix], q: &[Matrix], r: &Matrix, pencils: &[Matrix]) -> f64 {
    samples
        .iter()
        .zip(q)
        .zip(pencils)
        .map(|((g, q), p)| (&(g - &(q * p)) - r).operator_norm())
        .fold(0.0, f64::max)
}
