use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by state algebra, optical elements and the spectral model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mode registry is empty")]
    EmptyRegistry,

    #[error("mode name must be non-empty")]
    EmptyModeName,

    #[error("mode `{0}` is registered more than once")]
    DuplicateMode(String),

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("photon number {total} exceeds truncation limit {max}")]
    Truncation { total: u32, max: u32 },

    #[error("states are defined over different mode registries")]
    RegistryMismatch,

    #[error("transmissivity {0} is outside [0, 1]")]
    InvalidTransmissivity(f64),

    #[error("beam splitter `{0}` uses the same mode for both ports")]
    RepeatedPort(String),

    #[error("output mode `{0}` collides with a mode that is still in use")]
    OutputCollision(String),

    #[error("non-finite parameter `{0}`")]
    NonFinite(&'static str),

    #[error("spectral width must be strictly positive, got {0}")]
    NonPositiveWidth(f64),

    #[error("joint amplitude with both beams unfiltered is not square integrable")]
    UnfilteredPair,

    #[error("loop index {index} out of range ({count} loops declared)")]
    LoopIndex { index: usize, count: usize },

    #[error("fit needs at least 3 distinct phase points, got {0}")]
    TooFewPoints(usize),

    #[error("phase grid must be non-empty and strictly increasing")]
    BadGrid,

    #[error("unknown pattern `{0}`")]
    UnknownPattern(String),

    #[error("circuit is invalid: {0}")]
    InvalidCircuit(String),

    #[error(
        "quadrature did not converge: refinement changed V by {delta:.3e} (tolerance {tol:.3e})"
    )]
    NonConvergence { delta: f64, tol: f64 },
}
