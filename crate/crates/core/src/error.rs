use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    Cell {
        /// One-based data row (the header is row 0).
        row: usize,
        column: String,
        value: String,
    },

    #[error("label column '{0}' not found")]
    MissingLabelColumn(String),

    #[error("fewer than 2 classes (found {0})")]
    TooFewClasses(usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("class '{0}' has no samples")]
    EmptyClass(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed report: {0}")]
    Report(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from the
    /// input data or the configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
