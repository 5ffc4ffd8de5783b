use thiserror::Error;

/// Error taxonomy shared by every module in the crate.
///
/// The CLI maps these onto process exit codes: precondition and argument
/// problems exit 2, solver and numerical problems exit 3, IO problems exit 4.
#[derive(Debug, Error)]
pub enum DdcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A synthesis or feasibility program was solved to completion and shown
    /// infeasible. Distinct from `SolverFailure`, where no verdict exists.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("generation failure: {0}")]
    GenerationFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, DdcError>;

impl DdcError {
    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            DdcError::InvalidArgument(_) | DdcError::Precondition(_) => 2,
            DdcError::Infeasible(_)
            | DdcError::SolverFailure(_)
            | DdcError::NumericalFailure(_)
            | DdcError::GenerationFailure(_) => 3,
            DdcError::Io(_) | DdcError::Parse { .. } => 4,
        }
    }
}
