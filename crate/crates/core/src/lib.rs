//! Symmetric preparation `F(t,x) = U(t,x) (t I + M(x)) U*(t,x)` of Hermitian
//! matrix-valued power series, and symmetric division by the pencil
//! `P(t,B) = t I + B` through contour quadrature.
//!
//! Module map:
//!
//! * [`linalg`]: dense complex matrices, Jacobi eigensolver, PSD square root.
//! * [`symsolve`]: the symmetric-product equations `(UA + AU)/2 = B`.
//! * [`series`]: truncated multivariate series with matrix coefficients.
//! * [`prep`]: the coefficient recursion for `(U, M)` and the nonlinear map
//!   with its differential.
//! * [`division`]: contour and polynomial division by the pencil, the dyadic
//!   smooth-division demonstrator and the estimate report.

pub mod division;
pub mod error;
pub mod linalg;
pub mod prep;
pub mod random;
pub mod series;
pub mod symsolve;

pub use error::{Error, Result};
pub use linalg::{Matrix, C64};
pub use series::{MSeries, MultiIndex, XSeries};
