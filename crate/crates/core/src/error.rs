use std::path::PathBuf;

/// Errors raised by the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter dimension mismatch: expected {expected}, got {got}")]
    ParameterDimensionMismatch { expected: usize, got: usize },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("matrix pencil is numerically singular for every probe value {lambdas:?}")]
    IrregularPencil { lambdas: Vec<f64> },

    #[error("initial-value extension {term} has dimension {got}, system has n = {expected}")]
    InconsistentExtension {
        term: usize,
        expected: usize,
        got: usize,
    },

    #[error("time grids do not share a horizon ({left} vs {right})")]
    GridMismatch { left: f64, right: f64 },

    #[error("stiffness matrix is singular: {0}")]
    SingularAssembly(String),

    #[error("factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("time {t} lies outside [0, {horizon}]")]
    OutOfDomain { t: f64, horizon: f64 },

    #[error("implicit Euler step matrix E - dt*A is singular")]
    StepSingular,

    #[error("all training estimators vanish at N = 1; the reduced model is trivially exact")]
    DegenerateTraining,

    #[error("reduced system is singular")]
    SingularReducedSystem,

    #[error("unsupported source for closed-form reference: {0}")]
    UnsupportedSource(String),

    #[error("the reduced basis pipeline requires a parameter-independent A")]
    ParameterDependentOperator,

    #[error("system has non-zero initial values; homogenize it first")]
    NotHomogeneous,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn dims(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            got,
        }
    }

    /// True for failures caused by the numerics rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IrregularPencil { .. }
                | Error::SingularAssembly(_)
                | Error::FactorizationFailure(_)
                | Error::StepSingular
                | Error::DegenerateTraining
                | Error::SingularReducedSystem
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
