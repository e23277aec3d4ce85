//! Experiment driver behind the `lindblad-trotter` binary.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod output;

use lindblad_core::Error as CoreError;

pub use config::{Experiment, RunConfig};
pub use fit::{fit_loglog, FitResult};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical guard tripped: {0}")]
    Numerical(#[source] CoreError),
    #[error("infeasible plan: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) | Self::Io(_) => 2,
            Self::Infeasible(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Infeasible(msg) => Self::Infeasible(msg),
            other => Self::Numerical(other),
        }
    }
}
