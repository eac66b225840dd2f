use thiserror::Error;

use crate::pssd::PssdRunReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("dictionary term {term} evaluates to an all-zero column")]
    DegenerateDictionary { term: usize },

    #[error("signature dictionary matrices are rank deficient (rank {rank} < {required})")]
    SignatureRankError { rank: usize, required: usize },

    #[error("eigenfunction is numerically zero on the data")]
    DegenerateEigenfunction,

    #[error("observable row {step} has zero norm")]
    DegenerateObservable { step: usize },

    #[error("numerical failure: {0}")]
    NumericalError(String),

    #[error("internal error: {0}")]
    InternalError(String),

    #[error("agent {agent} aborted round: {source}")]
    AbortRound {
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no termination after {} rounds", .0.rounds_executed)]
    NoTermination(Box<PssdRunReport>),
}
