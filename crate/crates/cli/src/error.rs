use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USER: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const NONE_FEASIBLE: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed JSON: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Spec(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NoneFeasible(String),
    #[error(transparent)]
    Region(#[from] cfrelay_core::RegionError),
    #[error(transparent)]
    Optimize(#[from] cfrelay_core::optimize::OptimizeError),
    #[error(transparent)]
    Sim(#[from] cfrelay_core::sim::SimError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => exit::PARSE,
            CliError::NoneFeasible(_) => exit::NONE_FEASIBLE,
            _ => exit::USER,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
