use std::path::PathBuf;

/// Everything that can go wrong between reading a scenario and writing results.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("cell {cell} has a non-positive Jacobian ({jacobian:e})")]
    InvertedCell { cell: usize, jacobian: f64 },

    #[error("kernel evaluated at coincident points (distance {distance:e})")]
    CoincidentPoints { distance: f64 },

    #[error("singular linear system: zero pivot in column {column}")]
    SingularMatrix { column: usize },

    #[error("Newton failed after {iterations} iterations (residual {residual:e}): {reason}")]
    NewtonFailure {
        iterations: usize,
        residual: f64,
        reason: String,
        best: Vec<f64>,
        history: Vec<f64>,
    },

    #[error("time step fell below the minimum {dt_min:e} s at t = {t}")]
    StepTooSmall { t: f64, dt_min: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error comes from the nonlinear or linear solvers rather than
    /// from configuration or I/O.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::InvertedCell { .. }
                | Error::CoincidentPoints { .. }
                | Error::SingularMatrix { .. }
                | Error::NewtonFailure { .. }
                | Error::StepTooSmall { .. }
                | Error::Mesh(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
