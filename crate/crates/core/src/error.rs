use thiserror::Error;

/// Errors raised by the bridge, particle and estimation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A density, score or Hessian evaluated to a non-finite value.
    #[error("domain error at t = {t} on segment [{s1}, {s2}]: {what}")]
    Domain {
        t: f64,
        s1: f64,
        s2: f64,
        what: String,
    },

    /// The Euler recursion produced a non-finite state.
    #[error("non-finite state at Euler step {step}")]
    Overflow { step: usize },

    /// The Euler recursion left the model's state domain (e.g. positivity).
    #[error("state left the model domain at Euler step {step}")]
    DomainExit { step: usize },

    /// The proposal transition has zero density at the bridge endpoints.
    #[error("proposal density vanishes between the bridge endpoints")]
    ProposalSupport,

    /// Every particle weight vanished at the given time index.
    #[error("all particle weights vanished at time index {k}")]
    Degenerate { k: usize },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("parameter outside the admissible set: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
