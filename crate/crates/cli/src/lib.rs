// SPDX-License-Identifier: Apache-2.0

//! Library side of the `purcool` command-line tool: configuration, the four
//! subcommands and their file outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{Overrides, RunConfig};
pub use error::CliError;
