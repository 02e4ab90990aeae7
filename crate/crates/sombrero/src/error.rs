//! Crate-wide error type.

use crate::grid::Representation;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field is in the {found:?} representation, expected {expected:?}")]
    WrongRepresentation {
        expected: Representation,
        found: Representation,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("initial state leaks out of the position domain: estimated escaped mass {mass:.3e} exceeds {limit:.1e}")]
    DomainTooSmall { mass: f64, limit: f64 },

    #[error("momentum grid under-resolved: |p|max = {pmax:.3} but the packet needs > {required:.3}")]
    MomentumUnderresolved { pmax: f64, required: f64 },

    #[error("operation undefined at the conical intersection (|p| < {eps:.1e} at p = ({px:.3e}, {py:.3e}))")]
    SingularMomentum { px: f64, py: f64, eps: f64 },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("initial density matrix is not pure: largest eigenvalue {lambda:.6} < {required:.6}")]
    NotPure { lambda: f64, required: f64 },

    #[error("eigenvector tracking undersampled: overlap {overlap:.4} at sample {index} is below {threshold}")]
    Undersampled {
        overlap: f64,
        index: usize,
        threshold: f64,
    },

    #[error("shortest geodesic undefined: samples {index} and {other} are (nearly) antipodal")]
    AntipodalPoints { index: usize, other: usize },

    #[error("path sample {index} is not a unit vector (norm {norm:.6})")]
    NotUnitVector { index: usize, norm: f64 },

    #[error("dense oracle refused: grid {nx}x{ny} exceeds the {max}x{max} memory guard")]
    OracleGridTooLarge { nx: usize, ny: usize, max: usize },

    #[error("dense oracle only covers linear dynamics (g = 0), got a nonzero scattering matrix")]
    OracleNonlinear,

    #[error("dense eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("monitored {kind} failure at tau = {tau:.4}: value {value:.3e} exceeds tolerance {limit:.1e}")]
    Monitor {
        kind: &'static str,
        tau: f64,
        value: f64,
        limit: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error("series format error: {0}")]
    SeriesFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
