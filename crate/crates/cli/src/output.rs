// SPDX-License-Identifier: Apache-2.0

//! File writers. Every file carries the tool version and the hash of the
//! effective configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL: &str = "purcool";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stamp {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
}

impl Stamp {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            config_hash: config_hash(cfg),
        }
    }
}

/// SHA-256 of the compact JSON encoding of `cfg`.
pub fn config_hash(cfg: &RunConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serialises");
    hex::encode(Sha256::digest(&bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// CSV with a `# tool version config=<hash>` line above the header.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, stamp: &Stamp, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = Self {
            path: path.to_owned(),
            out: BufWriter::new(file),
        };
        w.line(&format!(
            "# {} {} config={}",
            stamp.tool, stamp.version, stamp.config_hash
        ))?;
        w.line(&header.join(","))?;
        Ok(w)
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        let line = fields.join(",");
        self.line(&line)
    }

    fn line(&mut self, s: &str) -> Result<(), CliError> {
        writeln!(self.out, "{s}").map_err(io_err(&self.path))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(io_err(&self.path))
    }
}

/// Shortest round-trip decimal; independent of locale.
pub fn num(x: f64) -> String {
    format!("{x}")
}
