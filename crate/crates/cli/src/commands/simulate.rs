// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;
use serde_json::Value;

use purcool_core::density::Spectrum;
use purcool_core::lambda3::{self, Regime};
use purcool_core::spectral::{build_generator, policy_registry, spectral_propagate};

use super::Outcome;
use crate::config::{RunConfig, System};
use crate::error::CliError;
use crate::output::{ensure_dir, num, write_json, CsvWriter, Stamp};

pub const DEFAULT_HORIZON: f64 = 3.0;
pub const DEFAULT_DT: f64 = 1e-4;

#[derive(Debug, Serialize)]
struct Analytic {
    tau_star: Option<f64>,
    return_function: f64,
    deviation: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    stamp: &'a Stamp,
    command: &'static str,
    config: &'a RunConfig,
    policy: &'a str,
    samples: usize,
    rows_written: usize,
    final_time: f64,
    final_spectrum: &'a [f64],
    final_purity: f64,
    max_sum_drift: f64,
    min_entry: f64,
    first_reorder: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic: Option<Analytic>,
}

/// Regime label along a greedy run of the Λ system: `pre` until `λ₂` and
/// `λ₃` merge at elapsed time `τ*(λ₀)`, `equalized` afterwards.
fn regime_label(system: &System, lambda0: &Spectrum, t: f64) -> &'static str {
    let Some(sys) = system.lambda() else {
        return "n/a";
    };
    match lambda3::regime(lambda0, t, sys) {
        Ok(r) if r.regime == Regime::PreEqualization => "pre",
        Ok(_) => "equalized",
        Err(_) => "degenerate",
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let system = cfg.validate()?;
    let stamp = Stamp::new(cfg);
    let sc = &cfg.simulate;
    let params = match &sc.policy_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => sc.policy_params.clone(),
    };
    let policy = policy_registry()
        .build(&sc.policy, &params)
        .map_err(|e| CliError::Config(format!("simulate.policy: {e}")))?;

    let t_final = cfg.horizon_or(DEFAULT_HORIZON);
    let dt = cfg.dt_or(DEFAULT_DT);
    let gen = build_generator(&system.rates());
    let traj = spectral_propagate(&cfg.initial_spectrum, policy.as_ref(), &gen, t_final, dt)?;
    let lambda0 = Spectrum::from_unsorted(cfg.initial_spectrum.clone())?;

    ensure_dir(&cfg.output_path)?;
    let n = system.dim();
    let names: Vec<String> = (1..=n).map(|k| format!("lambda{k}")).collect();
    let mut header = vec!["t"];
    header.extend(names.iter().map(String::as_str));
    header.extend(["purity", "regime"]);
    let mut csv = CsvWriter::create(&cfg.output_path.join("trajectory.csv"), &stamp, &header)?;
    let last = traj.samples.len() - 1;
    let mut rows = 0;
    for (k, s) in traj.samples.iter().enumerate() {
        if k % sc.stride != 0 && k != last {
            continue;
        }
        let mut fields = vec![num(s.t)];
        fields.extend(s.values.iter().map(|&x| num(x)));
        fields.push(num(s
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)));
        fields.push(regime_label(&system, &lambda0, s.t).to_owned());
        csv.row(&fields)?;
        rows += 1;
    }
    csv.finish()?;

    let end = traj.last();
    let final_purity = end.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let analytic = match (system.lambda(), policy.order_maintaining()) {
        (Some(sys), true) => {
            let v = lambda3::return_function(&lambda0, end.t, sys);
            Some(Analytic {
                tau_star: lambda3::tau_star(&lambda0, sys).ok(),
                return_function: v,
                deviation: (final_purity - v).abs(),
            })
        }
        _ => None,
    };
    let manifest = Manifest {
        stamp: &stamp,
        command: "simulate",
        config: cfg,
        policy: policy.name(),
        samples: traj.samples.len(),
        rows_written: rows,
        final_time: end.t,
        final_spectrum: &end.values,
        final_purity,
        max_sum_drift: traj.max_sum_drift,
        min_entry: traj.min_entry,
        first_reorder: traj.first_reorder,
        analytic,
    };
    write_json(&cfg.output_path.join("manifest.json"), &manifest)?;
    Ok(Outcome {
        passed: true,
        summary: format!("final purity {final_purity} at t = {}", end.t),
    })
}
