//! Named strip functions available to problem files.
//!
//! | name           | value                  | params (default)            |
//! |----------------|------------------------|-----------------------------|
//! | `sin`          | `sin(w t) I`           | `w` (1)                     |
//! | `cos`          | `cos(w t) I`           | `w` (1)                     |
//! | `gaussian`     | `exp(-a t^2) I`        | `a` (1)                     |
//! | `constant`     | `c I`                  | `c` (1)                     |
//! | `pencil_power` | `(t I + B)^k`          | `k` (1)                     |
//!
//! Every sampler also accepts `eps_max` (strip half-width, default 1) and
//! `bound` (declared `sup |G|` on the strip).

use anyhow::{bail, Context};
use symprep_core::division::{Pencil, StripFunction};
use symprep_core::{Matrix, C64};

use crate::files::{FunctionSpec, MatrixRecord};

pub const NAMES: [&str; 5] = ["sin", "cos", "gaussian", "constant", "pencil_power"];

fn polynomial(coeffs: &[MatrixRecord], dim: usize) -> anyhow::Result<Vec<Matrix>> {
    let coeffs = coeffs
        .iter()
        .map(MatrixRecord::to_matrix)
        .collect::<anyhow::Result<Vec<_>>>()?;
    if let Some(c) = coeffs.iter().find(|c| c.dim() != dim) {
        bail!("polynomial coefficient is {}x{}, expected N = {dim}", c.dim(), c.dim());
    }
    Ok(coeffs)
}

/// Polynomial coefficients when `spec` is a polynomial.
pub fn polynomial_coeffs(spec: &FunctionSpec, dim: usize) -> anyhow::Result<Option<Vec<Matrix>>> {
    match spec {
        FunctionSpec::Polynomial(c) => polynomial(c, dim).map(Some),
        FunctionSpec::Sampler { .. } => Ok(None),
    }
}

pub fn build(spec: &FunctionSpec, dim: usize, pencil: &Pencil) -> anyhow::Result<StripFunction> {
    let (name, params) = match spec {
        FunctionSpec::Polynomial(c) => {
            return Ok(StripFunction::polynomial(polynomial(c, dim)?)?);
        }
        FunctionSpec::Sampler { name, params } => (name.as_str(), params),
    };
    for key in params.keys() {
        let known = matches!(
            (name, key.as_str()),
            (_, "eps_max" | "bound")
                | ("sin" | "cos", "w")
                | ("gaussian", "a")
                | ("constant", "c")
                | ("pencil_power", "k")
        );
        if !known {
            bail!("sampler `{name}` has no parameter `{key}`");
        }
    }
    let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    let eps_max = get("eps_max", 1.0);
    let f = match name {
        "sin" => {
            let w = get("w", 1.0);
            StripFunction::scalar(dim, eps_max, move |s| (s * w).sin())
        }
        "cos" => {
            let w = get("w", 1.0);
            StripFunction::scalar(dim, eps_max, move |s| (s * w).cos())
        }
        "gaussian" => {
            let a = get("a", 1.0);
            StripFunction::scalar(dim, eps_max, move |s| (-s * s * a).exp())
        }
        "constant" => {
            let c = get("c", 1.0);
            StripFunction::scalar(dim, eps_max, move |_| C64::new(c, 0.0))
        }
        "pencil_power" => {
            let k = get("k", 1.0);
            if k < 0.0 || k.fract() != 0.0 || k > 16.0 {
                bail!("pencil_power needs an integer k in 0..=16, got {k}");
            }
            let k = k as u32;
            let p = pencil.clone();
            StripFunction::sampler(dim, eps_max, move |s| {
                let base = p.eval(s);
                (0..k).fold(Matrix::identity(base.dim()), |acc, _| &acc * &base)
            })
        }
        other => bail!("unknown sampler `{other}` (known: {})", NAMES.join(", ")),
    };
    Ok(match params.get("bound") {
        Some(&m) => f.with_bound(m),
        None => f,
    })
}

/// Samples `spec` at real points.
pub fn sample(spec: &FunctionSpec, dim: usize, pencil: &Pencil, t: &[f64]) -> anyhow::Result<Vec<Matrix>> {
    let f = build(spec, dim, pencil).context("building G")?;
    Ok(t.iter().map(|&t| f.eval(C64::new(t, 0.0))).collect())
}
