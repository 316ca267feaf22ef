//! Crate-wide error type.
//!
//! Errors are grouped by which stage of a run can produce them so that a
//! front end can map them to distinct exit codes: configuration problems,
//! data problems (ingest and validation, with line numbers where known), and
//! numerical failures inside the samplers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("data error at line {line}: {msg}")]
    DataAtLine { line: u64, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category name, used by front ends for exit
    /// codes and error documents.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Data(_) | Error::DataAtLine { .. } | Error::Csv(_) => "data",
            Error::Numerical(_) => "numeric",
            Error::Io(_) | Error::Json(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
