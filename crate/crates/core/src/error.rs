use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("block index {0} out of range 1..=16")]
    BlockIndex(usize),

    #[error("point ({x:.6}, {y:.6}, {z:.6}) is not in the air region: {reason}")]
    Region {
        x: f64,
        y: f64,
        z: f64,
        reason: String,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("point ({0:.6}, {1:.6}) lies outside the mesh")]
    OutsideMesh(f64, f64),

    #[error("material curve: {0}")]
    Material(String),

    #[error(
        "nonlinear solve did not converge after {iterations} iterations (last residual {:.3e})",
        .history.last().copied().unwrap_or(f64::NAN)
    )]
    NonConvergence { iterations: usize, history: Vec<f64> },

    #[error("linear system is singular or not positive definite: {0}")]
    Singular(String),

    #[error("matrix is not symmetric positive definite ({context}); smallest eigenvalue estimate {min_eigenvalue:.3e}")]
    NotSpd {
        context: &'static str,
        min_eigenvalue: f64,
    },

    #[error("invalid observable specification: {0}")]
    Observable(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("prior: {0}")]
    Prior(String),

    #[error("statistics: {0}")]
    Stats(String),

    #[error("inference: {0}")]
    Inference(String),

    #[error("chain aborted at step {step}: {message}")]
    ChainAborted {
        step: usize,
        message: String,
        partial: Box<crate::inference::Chain>,
    },

    #[error("checksum mismatch in {0}")]
    Checksum(PathBuf),

    #[error("unsupported format version {found} in {path} (expected {expected})")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
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
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
