//! Experiment runner, configuration and file formats for `geoxray-core`.

pub mod config;
pub mod experiment;
pub mod io;

use std::path::PathBuf;

pub use config::{ExperimentConfig, GammaMode, PRESETS};
pub use experiment::{execute, run_experiment, write_outputs, RunOutput, RunSummary, SnapshotMetrics};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] geoxray_core::Error),

    #[error("experiment {name}: {source}")]
    Experiment {
        name: String,
        #[source]
        source: geoxray_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl RunError {
    /// Process exit code: 2 for bad input, 3 for numerical failure, 1 for
    /// I/O.
    pub fn exit_code(&self) -> i32 {
        use geoxray_core::Error as E;
        let core = match self {
            RunError::Core(e) | RunError::Experiment { source: e, .. } => e,
            RunError::Config(_) => return 2,
            RunError::Io { .. } | RunError::Format { .. } => return 1,
        };
        match core {
            E::NonFinite(_) | E::PossiblyTrapped { .. } | E::Diverged { .. } => 3,
            _ => 2,
        }
    }
}
