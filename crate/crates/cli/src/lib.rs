//! Command-line driver: configuration, file formats and the `optimize`,
//! `evaluate` and `simulate` commands.

pub mod commands;
pub mod config;
pub mod io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid input; exit code 2.
    #[error("input error: {0}")]
    Input(String),
    /// The optimizer found no feasible initial particle; exit code 3.
    #[error("initialization failed: {0}")]
    Init(String),
    /// A placement given for simulation violates a constraint; exit code 4.
    #[error("infeasible placement: {0}")]
    Infeasible(String),
    /// Output could not be written; exit code 1.
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Output(_) => 1,
            CliError::Input(_) => 2,
            CliError::Init(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<lrp_core::Error> for CliError {
    fn from(e: lrp_core::Error) -> Self {
        match e {
            lrp_core::Error::InitializationFailed => CliError::Init(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}
