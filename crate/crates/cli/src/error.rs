use std::path::PathBuf;

use curlrec::error::{FieldError, MeshError, ReconstructionError, SolverError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    ConfigLine { line: usize, message: String },
    #[error("invalid {key}: {message}")]
    Config { key: String, message: String },
    #[error("mesh {path}: {source}")]
    Mesh { path: PathBuf, source: MeshError },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Reconstruction(#[from] ReconstructionError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}
