use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("series shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian: |A - A*| = {asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:.6e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("matrix is numerically singular (pivot {pivot:.3e})")]
    Singular { pivot: f64 },

    #[error("constant-in-t layer does not vanish: norm {norm:.3e} exceeds {tolerance:.3e}")]
    NonVanishingConstantLayer { norm: f64, tolerance: f64 },

    #[error("F(0,0) must vanish: |F(0,0)| = {norm:.3e} exceeds {tolerance:.3e}")]
    NonzeroConstantTerm { norm: f64, tolerance: f64 },

    #[error("dF/dt(0,0) must be positive definite: smallest eigenvalue {min_eigenvalue:.6e}")]
    NotPositiveTimeDerivative { min_eigenvalue: f64 },

    #[error("coefficient {index} of F is not Hermitian: asymmetry {asymmetry:.3e}")]
    NonHermitianInput { index: String, asymmetry: f64 },

    #[error("recursion right-hand side at {index} is not Hermitian: asymmetry {asymmetry:.3e}")]
    NonHermitianRhs { index: String, asymmetry: f64 },

    #[error("pencil requires |B| < 1, found |B| = {norm:.6}")]
    PencilNorm { norm: f64 },

    #[error("eps = {eps} is outside (0, {max}]")]
    EpsOutOfRange { eps: f64, max: f64 },

    #[error("panel density {panels} is below the minimum of {min} nodes per unit length")]
    TooFewPanels { panels: usize, min: usize },

    #[error("point t = {t} is outside the division rectangle |Re t| < 2")]
    PointOutsideContour { t: f64 },

    #[error("resolvent evaluated too close to the spectrum at t = {re}{im:+}i")]
    NearSpectrum { re: f64, im: f64 },

    #[error("insufficient decay: {what} = {value:.3e} exceeds {tolerance:.3e}")]
    InsufficientDecay { what: &'static str, value: f64, tolerance: f64 },

    #[error("band norms are not decaying: band {band} has norm {norm:.3e} after {previous:.3e}")]
    BandsNotDecaying { band: usize, norm: f64, previous: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures that mean the input violates a mathematical
    /// hypothesis that preparation or division needs.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::NonzeroConstantTerm { .. }
                | Error::NotPositiveTimeDerivative { .. }
                | Error::NonHermitianInput { .. }
                | Error::NonHermitianRhs { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::NotHermitian { .. }
                | Error::PencilNorm { .. }
                | Error::EpsOutOfRange { .. }
                | Error::TooFewPanels { .. }
                | Error::PointOutsideContour { .. }
                | Error::NearSpectrum { .. }
                | Error::InsufficientDecay { .. }
                | Error::BandsNotDecaying { .. }
        )
    }
}
