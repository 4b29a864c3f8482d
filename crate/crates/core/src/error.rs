use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires a periodic lattice")]
    NotPeriodic,

    #[error("wave number {0} is not on the lattice k-grid")]
    OffGrid(f64),

    #[error("pair state vanishes identically (Pauli exclusion)")]
    PauliExclusion,

    #[error("zero state: {0}")]
    ZeroState(&'static str),

    #[error("gap closes at k = {k}: {what}")]
    GapClosing { k: f64, what: &'static str },

    #[error("norm drift {drift:.3e} at t = {time} exceeds tolerance; reduce dt")]
    StepSize { drift: f64, time: f64 },

    #[error("density matrix lost positivity (min eigenvalue {min_eig:.3e}) at t = {time}; reduce dt")]
    Positivity { min_eig: f64, time: f64 },

    #[error("system too large for dense path: {sites} sites > {limit}")]
    SizeGuard { sites: usize, limit: usize },

    #[error("state support outside the plane-wave pair ({weight:.3e})")]
    SupportMismatch { weight: f64 },

    #[error("null projection (probability {0:.3e})")]
    NullProjection(f64),

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by integrator accuracy rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::StepSize { .. } | Error::Positivity { .. })
    }
}
