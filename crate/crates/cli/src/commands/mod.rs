// SPDX-License-Identifier: Apache-2.0

pub mod certify;
pub mod dp;
pub mod equiv;
pub mod simulate;

use serde::Serialize;

/// One pass/fail line of a report: `worst` is compared against `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub count: usize,
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// `false` maps to exit code 3.
    pub passed: bool,
    pub summary: String,
}
