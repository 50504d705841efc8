//! Price bars, implied-volatility marks, and the evaluation journal.
//!
//! File formats:
//!
//! * OHLC: CSV with header `date,open,high,low,close`
//! * vols: CSV with header `date,iv`
//! * journal: one JSON object per line, see [`journal`]
//!
//! Dates are ISO-8601 calendar days (`YYYY-MM-DD`).

mod bars;
pub mod journal;

use std::path::PathBuf;

use thiserror::Error;

pub use bars::{
    carry_forward, load_ohlc, load_vols, parse_ohlc, parse_vols, write_ohlc, write_vols, OhlcBar,
    VolPoint,
};
pub use journal::{read_journal, EvalOutcome, EvaluationRecord, Journal};

pub type Date = chrono::NaiveDate;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Validation { line: u64, message: String },
    #[error("{} is locked by another writer", .0.display())]
    Locked(PathBuf),
}

impl DataError {
    /// Line the diagnostic points at, if it came from file contents.
    pub fn line(&self) -> Option<u64> {
        match self {
            DataError::Parse { line, .. } | DataError::Validation { line, .. } => Some(*line),
            _ => None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}
