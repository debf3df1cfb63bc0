// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use purcool_core::hjb::SamplerConfig;
use purcool_core::lambda3::LambdaSystem;
use purcool_core::lindblad::RateMatrix;

use crate::error::CliError;

/// Either the Λ system `{gamma1, gamma2}` or a general `{rates}` matrix with
/// `rates[to][from]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<Vec<f64>>>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            gamma1: Some(2.0),
            gamma2: Some(1.0),
            rates: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum System {
    Lambda(LambdaSystem),
    General(RateMatrix),
}

impl System {
    pub fn rates(&self) -> RateMatrix {
        match self {
            System::Lambda(s) => s.rates(),
            System::General(r) => r.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            System::Lambda(_) => 3,
            System::General(r) => r.dim(),
        }
    }

    pub fn lambda(&self) -> Option<&LambdaSystem> {
        match self {
            System::Lambda(s) => Some(s),
            System::General(_) => None,
        }
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<System, CliError> {
        match (self.gamma1, self.gamma2, &self.rates) {
            (Some(g1), Some(g2), None) => LambdaSystem::new(g1, g2)
                .map(System::Lambda)
                .map_err(|e| CliError::Config(format!("system: {e}"))),
            (None, None, Some(rows)) => RateMatrix::from_rows(rows)
                .map(System::General)
                .map_err(|e| CliError::Config(format!("system.rates: {e}"))),
            _ => Err(CliError::Config(
                "system: give either both `gamma1` and `gamma2`, or `rates`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// `greedy`, `identity`, `fixed` or `schedule`.
    pub policy: String,
    pub policy_params: Value,
    /// JSON file holding `policy_params` (takes precedence when set).
    pub policy_file: Option<PathBuf>,
    /// Write every `stride`-th step (the last step is always written).
    pub stride: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            policy: "greedy".into(),
            policy_params: Value::Null,
            policy_file: None,
            stride: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    /// Sampler counts; the sampler seed is taken from the top-level `seed`.
    pub samplers: SamplerConfig,
    /// Spectra are `(i, j, k)/lattice` with `i ≥ j ≥ k` and `j ≥ 1`.
    pub lattice: usize,
    pub coherence_samples: usize,
    /// Also certify the `γ₁ = γ₂` system.
    pub equal_rates: bool,
    /// Negative control: reverse `μ` before maximising.
    pub swap_mu: bool,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            samplers: SamplerConfig::default(),
            lattice: 12,
            coherence_samples: 1000,
            equal_rates: true,
            swap_mu: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpConfig {
    pub m: usize,
    pub n_t: usize,
    pub samplers: SamplerConfig,
    pub max_deviation: f64,
    pub min_order_fraction: f64,
    /// Also solve at `2m` and require a strictly smaller deviation.
    pub refine: bool,
    /// Time slices written to the tables: every `table_stride`-th.
    pub table_stride: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            m: 60,
            n_t: 2000,
            samplers: SamplerConfig::dp_default(0),
            max_deviation: 5e-3,
            min_order_fraction: 0.99,
            refine: false,
            table_stride: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivConfig {
    pub samples: usize,
    pub dims: Vec<usize>,
    pub perturbation_cases: usize,
    /// Smallest eigenvalue gap in the perturbation cases.
    pub min_gap: f64,
    /// Larger of the two steps compared (the other is half of it).
    pub dt: f64,
}

impl Default for EquivConfig {
    fn default() -> Self {
        Self {
            samples: 500,
            dims: vec![3, 4],
            perturbation_cases: 100,
            min_gap: 0.05,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub initial_spectrum: Vec<f64>,
    /// Defaults per command: 3 for `simulate`, 1 for `dp`.
    pub horizon: Option<f64>,
    /// Defaults to `1e-4` for `simulate`.
    pub dt: Option<f64>,
    pub seed: u64,
    /// Not serialized, so reports and the config hash do not depend on where
    /// they are written.
    #[serde(skip_serializing)]
    pub output_path: PathBuf,
    pub simulate: SimulateConfig,
    pub certify: CertifyConfig,
    pub dp: DpConfig,
    pub equiv: EquivConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            initial_spectrum: vec![0.5, 0.3, 0.2],
            horizon: None,
            dt: None,
            seed: 0,
            output_path: PathBuf::from("out"),
            simulate: SimulateConfig::default(),
            certify: CertifyConfig::default(),
            dp: DpConfig::default(),
            equiv: EquivConfig::default(),
        }
    }
}

/// Command-line values that replace the corresponding config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub lambda0: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.output_path = p.clone();
        }
        if o.dt.is_some() {
            self.dt = o.dt;
        }
        if o.horizon.is_some() {
            self.horizon = o.horizon;
        }
        if o.gamma1.is_some() || o.gamma2.is_some() {
            if self.system.rates.is_some() {
                if o.gamma1.is_none() || o.gamma2.is_none() {
                    return Err(CliError::Config(
                        "--gamma1 and --gamma2 must both be given to replace a rate matrix".into(),
                    ));
                }
                self.system.rates = None;
            }
            if let Some(g) = o.gamma1 {
                self.system.gamma1 = Some(g);
            }
            if let Some(g) = o.gamma2 {
                self.system.gamma2 = Some(g);
            }
        }
        if let Some(l) = &o.lambda0 {
            self.initial_spectrum = l.clone();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<System, CliError> {
        let system = self.system.build()?;
        for (name, v) in [("horizon", self.horizon), ("dt", self.dt)] {
            if let Some(x) = v {
                if !(x.is_finite() && x > 0.0) {
                    return Err(CliError::Config(format!(
                        "{name} must be positive, got {x}"
                    )));
                }
            }
        }
        let l = &self.initial_spectrum;
        if l.len() != system.dim() {
            return Err(CliError::Config(format!(
                "initial_spectrum has {} entries, system has {} levels",
                l.len(),
                system.dim()
            )));
        }
        let sum: f64 = l.iter().sum();
        if l.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "initial_spectrum must be nonnegative and sum to 1 (sum = {sum})"
            )));
        }
        if self.simulate.stride == 0 || self.dp.table_stride == 0 {
            return Err(CliError::Config("strides must be positive".into()));
        }
        Ok(system)
    }

    pub fn horizon_or(&self, default: f64) -> f64 {
        self.horizon.unwrap_or(default)
    }

    pub fn dt_or(&self, default: f64) -> f64 {
        self.dt.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(matches!(c.validate().unwrap(), System::Lambda(_)));
    }

    #[test]
    fn unknown_fields_are_reported_with_position() {
        let err = RunConfig::from_json("{\n  \"sytem\": {}\n}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("sytem") && err.contains("line 2"), "{err}");
        let err = RunConfig::from_json("{\"dp\": {\"m\": \"sixty\"}}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn flags_win_over_file() {
        let mut c = RunConfig::from_json(
            r#"{"seed": 3, "system": {"rates": [[0,1],[0,0]]}, "initial_spectrum": [0.5, 0.5]}"#,
        )
        .unwrap();
        assert!(matches!(c.validate().unwrap(), System::General(_)));
        let o = Overrides {
            seed: Some(9),
            gamma1: Some(1.0),
            gamma2: Some(0.5),
            lambda0: Some(vec![0.6, 0.3, 0.1]),
            ..Overrides::default()
        };
        c.apply(&o).unwrap();
        assert_eq!(c.seed, 9);
        assert!(matches!(c.validate().unwrap(), System::Lambda(_)));
    }

    #[test]
    fn half_specified_systems_are_rejected() {
        let c = RunConfig::from_json(r#"{"system": {"gamma1": 2}}"#).unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::from_json(r#"{"system": {"rates": [[0,1],[0,0]]}}"#).unwrap();
        let o = Overrides {
            gamma1: Some(1.0),
            ..Overrides::default()
        };
        assert!(c.apply(&o).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            r#"{"initial_spectrum": [0.5, 0.6, -0.1]}"#,
            r#"{"initial_spectrum": [0.5, 0.5]}"#,
            r#"{"dt": 0}"#,
            r#"{"horizon": -1}"#,
            r#"{"system": {"gamma1": 1, "gamma2": 2}}"#,
        ] {
            assert!(
                RunConfig::from_json(text).unwrap().validate().is_err(),
                "{text}"
            );
        }
    }
}
