use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("potential is not locally integrable: {0}")]
    NonIntegrable(String),

    #[error("propagation step must be positive and finite, got {0}")]
    InvalidStep(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Dirichlet solution vanishes at x = {x} for z = {z}; move z off the real axis")]
    ZeroSolution { x: f64, z: Complex64 },

    #[error("x = {x} exceeds the series horizon {horizon}")]
    HorizonExceeded { x: f64, horizon: f64 },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("Weyl disk radius is not finite at z = {0}")]
    DegenerateDisk(Complex64),

    #[error("no root of the discriminant condition in [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("sampling grid skips a band between {lo} and {hi}; increase the resolution")]
    ResolutionTooCoarse { lo: f64, hi: f64 },

    #[error("invalid gap set: {0}")]
    InvalidGapSet(String),

    #[error("critical point solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("z = {0} lies on the spectrum")]
    OnSpectrum(Complex64),

    #[error("integration path passes within {clearance:e} of the spectrum")]
    PathTooCloseToSpectrum { clearance: f64 },

    #[error("asymptotic fit is ill-conditioned: {0}")]
    FitIllConditioned(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
