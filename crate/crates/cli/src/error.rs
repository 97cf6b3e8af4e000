use thiserror::Error;
use tm_core::{FemError, MeshError, ParameterError, SimError, StabilityError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Parameter(#[from] ParameterError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 2 configuration, 3 numerical failure, 4 analysis precondition.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parameter(_) | Self::Mesh(_) | Self::Io { .. } => 2,
            Self::Simulation(SimError::InvalidConfig(_)) | Self::Simulation(SimError::Parameter(_)) => 2,
            Self::Fem(_) | Self::Simulation(_) => 3,
            Self::Stability(_) => 4,
        }
    }
}
