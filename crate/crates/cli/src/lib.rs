//! Scenario-driven front end for the cgo-core experiments: configuration,
//! orchestration, persistence and plot data.

pub mod plot;
pub mod run;
pub mod scenario;
pub mod verify;

use thiserror::Error;

/// Environment variable naming the default output root.
pub const OUT_ROOT_VAR: &str = "CGO_OUT_ROOT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure in {context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: cgo_core::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    pub fn numerical(context: impl Into<String>) -> impl FnOnce(cgo_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Numerical { context, source }
    }
}
