use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("simplex iteration cap reached after {iterations} iterations")]
    IterationLimit { iterations: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solution is not optimal")]
    NotOptimal,

    #[error("uncertainty set is empty: {0}")]
    EmptyUncertaintySet(String),

    #[error("instance failed validation: {0}")]
    Validation(String),

    #[error("subproblem infeasible: {0}")]
    Infeasible(String),

    #[error("column-and-constraint generation did not converge in {iterations} iterations")]
    CcgIterationLimit { iterations: usize, best_objective: f64 },

    #[error("vehicle {vehicle}: {source}")]
    Vehicle {
        vehicle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn for_vehicle(self, vehicle: usize) -> Error {
        Error::Vehicle { vehicle, source: Box::new(self) }
    }
}
