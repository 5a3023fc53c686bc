use std::path::PathBuf;

use chrono::NaiveDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("structural error on {date}: {message}")]
    Structure { date: NaiveDate, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("non-finite training loss at epoch {epoch}, batch {batch}: {loss}")]
    Training { epoch: usize, batch: usize, loss: f64 },

    #[error("stage `{stage}` failed{}: {source}", day.map(|d| format!(" on {d}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        day: Option<NaiveDate>,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the pipeline stage (and optionally the day) in which it occurred.
    pub fn in_stage(self, stage: &'static str, day: Option<NaiveDate>) -> Self {
        Error::Stage {
            stage,
            day,
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
