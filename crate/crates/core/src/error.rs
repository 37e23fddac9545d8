use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the refinement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("rotation matrix is not orthonormal (max deviation {deviation:.3e})")]
    NonOrthonormal { deviation: f64 },

    #[error("{algorithm} exceeded {limit} iterations")]
    IterationLimit {
        algorithm: &'static str,
        limit: usize,
    },

    #[error("object center coincides with the camera origin; viewing ray undefined")]
    DegenerateRay,

    #[error("non-finite cost at iteration {iteration}")]
    NonFiniteCost { iteration: usize },

    #[error("scale estimation needs at least two correspondences on one object")]
    InsufficientPairs,

    #[error("only {survivors} points survive filtering (need at least {required})")]
    EmptyResult { survivors: usize, required: usize },

    #[error("plane fit needs at least 3 points, got {0}")]
    InsufficientPoints(usize),

    #[error("no plane consensus: best inlier fraction {fraction:.3}")]
    NoConsensus { fraction: f64 },

    #[error("vertex projects behind the camera (z = {z:.3e})")]
    BehindCamera { z: f64 },

    #[error("could not place object {object} after {attempts} attempts")]
    PlacementFailure { object: usize, attempts: usize },

    #[error("{path}: parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("mesh file not found: {0}")]
    MissingMesh(PathBuf),

    #[error("invalid quaternion for {object}: {reason}")]
    InvalidQuaternion { object: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IterationLimit { .. } | Error::NonFiniteCost { .. } | Error::NoConsensus { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
