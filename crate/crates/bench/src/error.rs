use sqvi::SqviError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}:{column}: {message}")]
    ProblemFile {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Solver(#[from] SqviError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 2 configuration, 3 solver failure, 4 infeasible model.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::ProblemFile { .. } | BenchError::Io { .. } => 2,
            BenchError::Solver(e) if e.is_infeasible() => 4,
            BenchError::Solver(SqviError::InvalidConfig(_)) => 2,
            BenchError::Solver(_) | BenchError::Csv(_) | BenchError::Json(_) => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
