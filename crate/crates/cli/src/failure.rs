//! Error categories and their exit codes.

use std::fmt;
use std::path::PathBuf;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_FILE: i32 = 3;
pub const EXIT_DIMENSION: i32 = 4;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError(message.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug)]
pub struct MissingFile(pub PathBuf);

impl fmt::Display for MissingFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no such file: {}", self.0.display())
    }
}

impl std::error::Error for MissingFile {}

/// Maps an error chain to an exit code and a category label.
pub fn classify(err: &anyhow::Error) -> (i32, &'static str) {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return (EXIT_CONFIG, "config");
        }
        if cause.is::<MissingFile>() {
            return (EXIT_MISSING_FILE, "missing file");
        }
        if let Some(e) = cause.downcast_ref::<shapprune::Error>() {
            match e {
                shapprune::Error::DimensionMismatch { .. } => return (EXIT_DIMENSION, "dimension mismatch"),
                shapprune::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                    return (EXIT_MISSING_FILE, "missing file")
                }
                shapprune::Error::Domain(_) | shapprune::Error::InvalidTable(_) => {
                    return (EXIT_CONFIG, "config")
                }
                _ => {}
            }
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return (EXIT_MISSING_FILE, "missing file");
            }
        }
    }
    (EXIT_OTHER, "error")
}
