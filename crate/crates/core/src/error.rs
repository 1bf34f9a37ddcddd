use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance schema violation at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("failed to parse instance {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("infeasible parameter regime: no FR-feasible instance after {attempts} attempts")]
    InfeasibleRegime { attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("source node {node} has no open route to any exit")]
    DisconnectedSource { node: usize },

    #[error("node {node} is not connected to any exit")]
    Disconnected { node: usize },

    #[error("no feasible sample reached zero energy for node {node}")]
    NoFeasibleSample { node: usize },

    #[error("selected arcs do not connect node {node} to an exit")]
    NoPathInSelection { node: usize },

    #[error("no sampled paths for node {node}")]
    NoPaths { node: usize },

    #[error("no open path for source node {node} under the current reservation")]
    NoOpenPath { node: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix has {cols} columns, completion is limited to {limit}")]
    SizeGuard { cols: usize, limit: usize },

    #[error("design count exceeds cap of {cap}")]
    CapExceeded { cap: usize },

    #[error("network has zero total demand")]
    ZeroDemand,

    #[error("demand at node {node} is not integral ({demand})")]
    NonIntegralDemand { node: usize, demand: f64 },

    #[error("seed {seed} could not be evaluated")]
    InfeasibleSeed { seed: usize },

    #[error("no seed produced a usable design")]
    NoIncumbent,

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            location: location.into(),
            message: message.into(),
        }
    }
}
