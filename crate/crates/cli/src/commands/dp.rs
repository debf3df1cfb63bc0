// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use purcool_core::hjb::{compare_with_analytic, dp_solve, DpComparison, SamplerConfig, ValueTable};
use purcool_core::lambda3::LambdaSystem;

use super::{Check, Outcome};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, num, write_json, CsvWriter, Stamp};

pub const DEFAULT_HORIZON: f64 = 1.0;

#[derive(Debug, Serialize)]
pub struct Refinement {
    pub m: usize,
    pub comparison: DpComparison,
    pub deviation_decreased: bool,
}

#[derive(Debug, Serialize)]
pub struct DpReport {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub command: &'static str,
    pub config: RunConfig,
    pub horizon: f64,
    pub actions: usize,
    pub grid_points: usize,
    pub comparison: DpComparison,
    /// Largest `V(τ) − V(τ + δt)` on the grid.
    pub tau_monotonicity_violation: f64,
    /// Largest decrease of `V` along an elementary transfer.
    pub schur_violation: f64,
    pub terminal_exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<Refinement>,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

fn solve(cfg: &RunConfig, sys: &LambdaSystem, m: usize) -> Result<(ValueTable, usize), CliError> {
    let samplers = SamplerConfig {
        seed: cfg.seed,
        ..cfg.dp.samplers.clone()
    };
    let actions = samplers.build(3)?;
    let t_final = cfg.horizon_or(DEFAULT_HORIZON);
    Ok((
        dp_solve(sys, t_final, cfg.dp.n_t, m, &actions)?,
        actions.len(),
    ))
}

fn check(name: &str, passed: bool, worst: f64, tolerance: f64, count: usize) -> Check {
    Check {
        name: name.to_owned(),
        passed,
        count,
        worst,
        tolerance,
    }
}

/// Solves, compares with the closed form and (optionally) refines.
pub fn analyse(cfg: &RunConfig) -> Result<(DpReport, ValueTable), CliError> {
    let system = cfg.validate()?;
    let sys = *system
        .lambda()
        .ok_or_else(|| CliError::Config("dp needs a Λ system (gamma1, gamma2)".into()))?;
    let (table, n_actions) = solve(cfg, &sys, cfg.dp.m)?;
    let comparison = compare_with_analytic(&table, &sys)?;
    let n_t = table.n_t();
    let terminal_exact =
        (0..table.points().len()).all(|p| table.value(n_t, p) == table.point_spectrum(p)[0]);

    let refinement = if cfg.dp.refine {
        let (fine, _) = solve(cfg, &sys, 2 * cfg.dp.m)?;
        let c = compare_with_analytic(&fine, &sys)?;
        Some(Refinement {
            m: 2 * cfg.dp.m,
            deviation_decreased: c.max_deviation < comparison.max_deviation,
            comparison: c,
        })
    } else {
        None
    };

    let mut checks = vec![
        check(
            "max_deviation",
            comparison.max_deviation <= cfg.dp.max_deviation,
            comparison.max_deviation,
            cfg.dp.max_deviation,
            comparison.interior_points,
        ),
        check(
            "order_maintaining_fraction",
            comparison.order_maintaining_fraction >= cfg.dp.min_order_fraction,
            comparison.order_maintaining_fraction,
            cfg.dp.min_order_fraction,
            comparison.interior_points * n_t,
        ),
        check(
            "terminal_condition",
            terminal_exact,
            0.0,
            0.0,
            table.points().len(),
        ),
    ];
    if let Some(r) = &refinement {
        checks.push(check(
            "refinement_decreases_deviation",
            r.deviation_decreased,
            r.comparison.max_deviation,
            comparison.max_deviation,
            r.comparison.interior_points,
        ));
    }
    let all_passed = checks.iter().all(|c| c.passed);
    let report = DpReport {
        stamp: Stamp::new(cfg),
        command: "dp",
        config: cfg.clone(),
        horizon: table.t_final(),
        actions: n_actions,
        grid_points: table.points().len(),
        tau_monotonicity_violation: table.tau_monotonicity_violation(),
        schur_violation: table.schur_violation(),
        terminal_exact,
        comparison,
        refinement,
        checks,
        all_passed,
    };
    Ok((report, table))
}

fn slices(table: &ValueTable, stride: usize, upto: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=upto).step_by(stride).collect();
    if v.last() != Some(&upto) {
        v.push(upto);
    }
    let _ = table;
    v
}

fn write_tables(cfg: &RunConfig, stamp: &Stamp, table: &ValueTable) -> Result<(), CliError> {
    let t_final = table.t_final();
    let n_t = table.n_t();
    let mut values = CsvWriter::create(
        &cfg.output_path.join("value_table.csv"),
        stamp,
        &[
            "i", "j", "k", "lambda1", "lambda2", "lambda3", "t", "tau", "V",
        ],
    )?;
    for n in slices(table, cfg.dp.table_stride, n_t) {
        let t = table.time(n);
        for (p, pt) in table.points().iter().enumerate() {
            let l = table.point_spectrum(p);
            values.row(&[
                pt[0].to_string(),
                pt[1].to_string(),
                pt[2].to_string(),
                num(l[0]),
                num(l[1]),
                num(l[2]),
                num(t),
                num(t_final - t),
                num(table.value(n, p)),
            ])?;
        }
    }
    values.finish()?;

    let mut policy = CsvWriter::create(
        &cfg.output_path.join("policy_table.csv"),
        stamp,
        &["i", "j", "k", "t", "tau", "action", "label", "permutation"],
    )?;
    for n in slices(table, cfg.dp.table_stride, n_t - 1) {
        let t = table.time(n);
        for (p, pt) in table.points().iter().enumerate() {
            let a = table.policy(n, p);
            policy.row(&[
                pt[0].to_string(),
                pt[1].to_string(),
                pt[2].to_string(),
                num(t),
                num(t_final - t),
                a.to_string(),
                table.action_label(a).to_owned(),
                table.action_is_permutation(a).to_string(),
            ])?;
        }
    }
    policy.finish()
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (report, table) = analyse(cfg)?;
    ensure_dir(&cfg.output_path)?;
    write_tables(cfg, &report.stamp, &table)?;
    write_json(&cfg.output_path.join("dp_report.json"), &report)?;
    Ok(Outcome {
        passed: report.all_passed,
        summary: format!(
            "m = {}: max deviation {:.3e}, order-maintaining {:.4}",
            report.comparison.m,
            report.comparison.max_deviation,
            report.comparison.order_maintaining_fraction
        ),
    })
}
