use std::path::PathBuf;

use geospot_core::catalog::CatalogError;

/// Failure to read, parse or validate an input file.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{what} not found: {}", path.display())]
    NotFound { what: &'static str, path: PathBuf },
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed document. `line` is 0 when the position is unknown.
    #[error("parse error in {} at line {line}, column {column}, field `{field}`: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, field: String, message: String },
    #[error("validation error at `{key}`: {message}")]
    Validation { key: String, message: String },
}

impl LoadError {
    /// Offending key or field, if the error names one.
    pub fn key(&self) -> Option<&str> {
        match self {
            LoadError::Parse { field, .. } => Some(field),
            LoadError::Validation { key, .. } => Some(key),
            _ => None,
        }
    }
}

impl From<CatalogError> for LoadError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Validation { key, message } => LoadError::Validation { key, message },
            CatalogError::MissingRate(what) => LoadError::Validation { key: "prices".into(), message: format!("missing rate: {what}") },
            CatalogError::Domain(m) => LoadError::Validation { key: "value".into(), message: m },
        }
    }
}
