//! Configured runs, parameter sweeps and their on-disk outputs.

mod config;
mod manifest;
mod run;
mod svg;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{
    load_config, parse_config, to_toml, with_parameter, ConfigError, ExperimentConfig, Scenario, ScenarioKind,
};
pub use manifest::{config_hash, ErrorInfo, RunManifest, MANIFEST_FILE};
pub use run::{run_experiment, FRAME_TOLERANCE};
pub use svg::{render_profile_svg, BoundaryProfile};
pub use sweep::{sweep, worker_count, SweepRow, SweepSummary, SUMMARY_FILE};

use crate::flow::FlowError;
use crate::frame::FrameError;
use crate::pde::PdeError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error("invariant breach: {0}")]
    InvariantBreach(String),
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ExperimentError {
    /// Process exit code: 2 configuration, 3 flow failure, 4 invariant
    /// breach.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Flow(FlowError::InvalidConfig(_)) | Self::Pde(PdeError::InvalidConfig(_)) => 2,
            Self::Flow(FlowError::InvariantBreach { .. }) | Self::InvariantBreach(_) => 4,
            Self::Frame(FrameError::IdentityViolation { .. }) => 4,
            _ => 3,
        }
    }

    /// Short machine-readable kind for manifests and summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "ConfigError",
            Self::Flow(e) => match e {
                FlowError::InvalidConfig(_) => "InvalidConfig",
                FlowError::InvariantBreach { .. } => "InvariantBreach",
                FlowError::DegenerateGraph { .. } => "DegenerateGraph",
                FlowError::Singularity { .. } => "Singularity",
                FlowError::InsufficientData(_) => "InsufficientData",
                FlowError::DomainError(_) => "DomainError",
                FlowError::Pde(_) => "PdeError",
                FlowError::Geometry(_) => "GeometryError",
                FlowError::Diagnostics(_) => "DiagnosticsError",
            },
            Self::Frame(_) => "FrameError",
            Self::Pde(_) => "PdeError",
            Self::InvariantBreach(_) => "InvariantBreach",
            Self::Io { .. } => "IoError",
        }
    }
}
