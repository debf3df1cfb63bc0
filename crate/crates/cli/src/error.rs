// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use purcool_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// 1 for usage and input problems, 2 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::InvariantViolation { .. }
                | CoreError::GridUnderflow { .. }
                | CoreError::EigensolverFailure
                | CoreError::NegativeEigenvalue { .. }
                | CoreError::TraceDeviation { .. }
                | CoreError::DomainViolation(_)
                | CoreError::DegenerateInput(_) => 2,
                _ => 1,
            },
        }
    }
}
