use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Two bodies are at (or below the configured floor of) zero separation,
    /// where the vector field is singular.
    #[error("collision: bodies {i} and {j} at separation {separation:e} (floor {floor:e})")]
    Collision {
        i: usize,
        j: usize,
        separation: f64,
        floor: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Radius estimation had too few usable coefficient orders.
    #[error("radius estimate: only {found} usable orders, need at least {needed}")]
    Estimate { found: usize, needed: usize },

    #[error("step cap exceeded: more than {0} steps")]
    MaxSteps(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Invariant(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::Collision { .. }
            | Error::Domain(_)
            | Error::Convergence(_)
            | Error::Estimate { .. } => 3,
            Error::MaxSteps(_) => 4,
        }
    }
}
