//! The map `(U, M) -> (d/dt [U (tI + M) U*], U_0 M U_0*)`, its differential,
//! and the inverse of the differential at `M = 0`.

use crate::error::{Error, Result};
use crate::linalg::skew_part;
use crate::series::{indices_up_to, MSeries, MultiIndex, XSeries};
use crate::symsolve::solve_skew;

/// How the kernel of the differential is resolved when inverting it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Skew part `B = 0`, i.e. `u = A (U^{-1})* / 2`.
    GaugeZero,
    /// `B` chosen so that `u` is Hermitian; needs Hermitian `U` with
    /// `U_{0,0} > 0`.
    SymmetricUnique,
}

/// `(F1, F0) = (d/dt [U (tI + M) U*], U_0 M U_0*)` with `U_0 = U(0, x)`.
pub fn nonlinear_f_map(u: &MSeries, m: &XSeries) -> Result<(MSeries, XSeries)> {
    let product = u.mul(&MSeries::pencil(m))?.mul(&u.adjoint())?;
    let f1 = product.dt();
    let u0 = u.t_layer(0);
    let f0 = u0.mul(m)?.mul(&u0.adjoint())?;
    Ok((f1, XSeries::new(f0)?))
}

/// Differential of `nonlinear_f_map` at `(U, M)` applied to `(u, m)`:
/// `A1 = d/dt [2 re(U (tI + M) u*) + U m U*]`,
/// `A0 = U_0 m U_0* + 2 re(U_0 M u_0*)`.
pub fn apply_df(u: &MSeries, m: &XSeries, du: &MSeries, dm: &XSeries) -> Result<(MSeries, XSeries)> {
    let scale = dm.max_norm().max(1.0);
    let defect = dm.hermitian_defect();
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian {
            asymmetry: defect,
            tolerance: 1e-10 * scale,
        });
    }
    let cross = u.mul(&MSeries::pencil(m))?.mul(&du.adjoint())?;
    let a1 = cross
        .hermitian_part()
        .scale_real(2.0)
        .add(&u.mul(dm)?.mul(&u.adjoint())?)?
        .dt();
    let u0 = u.t_layer(0);
    let du0 = du.t_layer(0);
    let a0 = u0
        .mul(dm)?
        .mul(&u0.adjoint())?
        .add(&u0.mul(m)?.mul(&du0.adjoint())?.hermitian_part().scale_real(2.0))?;
    Ok((a1, XSeries::new(a0)?))
}

/// Solves `dF(U, 0)(u, m) = (A1, A0)`.
///
/// `m = U_0^{-1} A0 U_0^{-*}` and `2 re(U u*) = A` with
/// `A = (int_0^t A1 + A0 - U m U*) / t`; then `u = (A - B)(U^{-1})* / 2`
/// where `B` is skew-Hermitian and selected by `mode`.
pub fn solve_df_at_m0(
    u: &MSeries,
    a1: &MSeries,
    a0: &XSeries,
    mode: SolveMode,
) -> Result<(MSeries, XSeries)> {
    let u0 = u.t_layer(0);
    let u0_inv = u0.inverse()?;
    let m = u0_inv.mul(a0)?.mul(&u0_inv.adjoint())?.hermitian_part();
    let m = XSeries::new(m)?;

    let integral = a1.with_order(a1.order() + 1).integrate_t();
    let numerator = integral.add(a0)?.sub(&u.mul(&m)?.mul(&u.adjoint())?)?;
    let a = numerator.divide_by_t()?;

    let w = u.inverse()?;
    let b = match mode {
        SolveMode::GaugeZero => MSeries::zero(u.nvars(), u.dim(), a.order()),
        SolveMode::SymmetricUnique => symmetric_gauge(u, &w, &a)?,
    };
    let du = a.sub(&b)?.mul(&w.adjoint())?.scale_real(0.5);
    Ok((du, m))
}

/// The skew-Hermitian `B` with `W (A + B)` Hermitian (equivalently `u`
/// Hermitian), degree by degree.
fn symmetric_gauge(u: &MSeries, w: &MSeries, a: &MSeries) -> Result<MSeries> {
    let scale = u.max_norm().max(1.0);
    let defect = u.hermitian_defect();
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian {
            asymmetry: defect,
            tolerance: 1e-10 * scale,
        });
    }
    let zero = MultiIndex::zero(u.nvars());
    let w00 = w.coeff_or_zero(&zero);
    let wa = w.mul(a)?;
    let order = a.order();
    let mut b = MSeries::zero(u.nvars(), u.dim(), order);
    for idx in indices_up_to(u.nvars(), order) {
        // im(W_00 B_d) = -im((W A)_d) - im(sum_{c != 0} W_c B_{d - c})
        let mut known = wa.coeff_or_zero(&idx);
        for (c, wc) in w.iter() {
            if c.is_zero() {
                continue;
            }
            if let Some(rest) = idx.checked_sub(c) {
                if let Some(bc) = b.coeff(&rest) {
                    known.add_product(wc, bc);
                }
            }
        }
        let rhs = -&skew_part(&known);
        let bd = solve_skew(&w00, &rhs)?;
        if !bd.is_zero() {
            b.set(idx, bd)?;
        }
    }
    Ok(b)
}

/// Convenience for tests and the CLI: `2 re(U u*)`.
pub fn twice_re(u: &MSeries, du: &MSeries) -> Result<MSeries> {
    Ok(u.mul(&du.adjoint())?.hermitian_part().scale_real(2.0))
}
