//! Numerical spectral theory for half-line Schrödinger operators
//! `L_V = −d²/dx² + V` on `[0, ∞)`.

pub mod cli;
pub mod error;
pub mod martin;
pub mod output;
pub mod periodic;
pub mod potentials;
pub mod propagation;
pub mod quadrature;
pub mod regularity;

pub use error::{Error, Result};
pub use martin::{CriticalPoints, GapSet, MartinEvaluation};
pub use periodic::BandSpectrum;
pub use potentials::{Block, Bump, BumpPositions, CesaroTrace, PotentialSpec};
pub use propagation::{MeasureCDF, PrueferState, ScaledTransferMatrix, SpectralPoint};
pub use regularity::{RegularityConfig, RegularityReport, Thresholds, Verdict};
