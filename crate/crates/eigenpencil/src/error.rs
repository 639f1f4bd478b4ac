//! Error type shared by all analysis stages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse failure: {0}")]
    Parse(String),

    /// A validated invariant of the input data does not hold. The message
    /// names the violated invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver did not converge: {0}")]
    EigenFailure(String),

    /// Branch matching stayed ambiguous at the maximum grid refinement.
    #[error("unresolvable eigenvalue crossing in [{lo}, {hi}] (min overlap {overlap:.3})")]
    UnresolvableCrossing { lo: f64, hi: f64, overlap: f64 },

    #[error("root refinement failed to converge in [{lo}, {hi}]")]
    RootRefinement { lo: f64, hi: f64 },

    /// A finite-difference derivative estimate exceeded its error budget.
    #[error("derivative estimate unreliable: {0}")]
    UnreliableDerivative(String),

    /// Two independently computed quantities that must agree exactly do not.
    #[error("internal consistency breach: {0}")]
    InvariantBreach(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the command line front-end maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::InvalidInput(_) | Error::Unsupported(_) | Error::Io(_) => 3,
            _ => 4,
        }
    }
}
