// SPDX-License-Identifier: Apache-2.0

use rand::Rng;
use serde::Serialize;

use purcool_core::lindblad::RateMatrix;
use purcool_core::sampling::{haar_unitary_from, random_simplex, random_spectrum, rng};
use purcool_core::spectral::{
    build_generator, first_order_error, spectral_rhs, spectral_rhs_oracle, theta_from_unitary,
};

use super::{Check, Outcome};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, write_json, Stamp};

pub const ALGEBRAIC_TOL: f64 = 1e-9;
pub const RATIO_BOUNDS: (f64, f64) = (3.5, 4.5);

#[derive(Debug, Serialize)]
pub struct DimensionSweep {
    pub n: usize,
    pub samples: usize,
    pub max_deviation: f64,
    pub zero_rate_deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct PerturbationSweep {
    pub cases: usize,
    pub dt: f64,
    pub min_gap: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub zero_rate_error: f64,
}

#[derive(Debug, Serialize)]
pub struct EquivReport {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub command: &'static str,
    pub config: RunConfig,
    pub dimensions: Vec<DimensionSweep>,
    pub perturbation: PerturbationSweep,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

/// Random rates: for `n = 4`, two excited levels (1 and 2) decaying into the
/// ground levels 0 and 3; otherwise every off-diagonal entry in `[0, 1)`.
fn random_rates<R: Rng>(r: &mut R, n: usize) -> RateMatrix {
    let mut g = vec![vec![0.0; n]; n];
    if n == 4 {
        for from in [1, 2] {
            for to in [0, 3] {
                g[to][from] = r.random::<f64>();
            }
        }
    } else {
        for (i, row) in g.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                if i != j {
                    *x = r.random::<f64>();
                }
            }
        }
    }
    RateMatrix::from_rows(&g).expect("nonnegative rates")
}

fn gapped_spectrum<R: Rng>(r: &mut R, n: usize, gap: f64) -> Vec<f64> {
    loop {
        let v = random_spectrum(r, n);
        if v.windows(2).all(|w| w[0] - w[1] >= gap) {
            return v;
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn equiv(cfg: &RunConfig) -> Result<EquivReport, CliError> {
    let ec = &cfg.equiv;
    let n_max = ec.dims.iter().copied().max().unwrap_or(0);
    if ec.dims.is_empty() || ec.dims.contains(&0) || ec.dims.contains(&1) {
        return Err(CliError::Config(
            "equiv.dims must list dimensions ≥ 2".into(),
        ));
    }
    if ec.dt.is_nan()
        || ec.dt <= 0.0
        || ec.min_gap.is_nan()
        || ec.min_gap <= 0.0
        || ec.min_gap * n_max as f64 >= 1.0
    {
        return Err(CliError::Config(
            "equiv.dt must be positive and 0 < min_gap·N < 1".into(),
        ));
    }
    let mut r = rng(cfg.seed);

    let mut dimensions = Vec::new();
    for &n in &ec.dims {
        let mut worst = 0.0_f64;
        for _ in 0..ec.samples {
            let rates = random_rates(&mut r, n);
            let u = haar_unitary_from(&mut r, n);
            let lam = random_simplex(&mut r, n);
            let theta = theta_from_unitary(&u)?;
            let fast = spectral_rhs(&lam, &theta, &build_generator(&rates))?;
            let slow = spectral_rhs_oracle(&lam, &u, &rates)?;
            worst = worst.max(max_abs_diff(&fast, &slow));
        }
        let zero = RateMatrix::zeros(n);
        let u = haar_unitary_from(&mut r, n);
        let lam = random_simplex(&mut r, n);
        let fast = spectral_rhs(&lam, &theta_from_unitary(&u)?, &build_generator(&zero))?;
        let slow = spectral_rhs_oracle(&lam, &u, &zero)?;
        let zero_dev = fast
            .iter()
            .chain(&slow)
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        dimensions.push(DimensionSweep {
            n,
            samples: ec.samples,
            max_deviation: worst,
            zero_rate_deviation: zero_dev,
        });
    }

    let n = ec.dims[0];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..ec.perturbation_cases {
        let rates = random_rates(&mut r, n);
        let u = haar_unitary_from(&mut r, n);
        let lam = gapped_spectrum(&mut r, n, ec.min_gap);
        let ratio = first_order_error(&lam, &u, &rates, ec.dt)?
            / first_order_error(&lam, &u, &rates, ec.dt / 2.0)?;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    let u = haar_unitary_from(&mut r, n);
    let lam = gapped_spectrum(&mut r, n, ec.min_gap);
    let zero_err = first_order_error(&lam, &u, &RateMatrix::zeros(n), ec.dt)?;
    let perturbation = PerturbationSweep {
        cases: ec.perturbation_cases,
        dt: ec.dt,
        min_gap: ec.min_gap,
        min_ratio: lo,
        max_ratio: hi,
        zero_rate_error: zero_err,
    };

    let algebraic = dimensions
        .iter()
        .map(|d| d.max_deviation)
        .fold(0.0, f64::max);
    let zero_alg = dimensions
        .iter()
        .map(|d| d.zero_rate_deviation)
        .fold(0.0, f64::max);
    let ratio_margin = (RATIO_BOUNDS.0 - lo).max(hi - RATIO_BOUNDS.1);
    let checks = vec![
        Check {
            name: "canonical_form".into(),
            passed: algebraic <= ALGEBRAIC_TOL,
            count: ec.samples * ec.dims.len(),
            worst: algebraic,
            tolerance: ALGEBRAIC_TOL,
        },
        Check {
            name: "zero_rates".into(),
            passed: zero_alg == 0.0,
            count: ec.dims.len(),
            worst: zero_alg,
            tolerance: 0.0,
        },
        Check {
            name: "first_order_ratio".into(),
            passed: ec.perturbation_cases > 0 && ratio_margin <= 0.0,
            count: ec.perturbation_cases,
            worst: ratio_margin,
            tolerance: 0.0,
        },
    ];
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(EquivReport {
        stamp: Stamp::new(cfg),
        command: "equiv",
        config: cfg.clone(),
        dimensions,
        perturbation,
        checks,
        all_passed,
    })
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let report = equiv(cfg)?;
    ensure_dir(&cfg.output_path)?;
    write_json(&cfg.output_path.join("equiv_report.json"), &report)?;
    Ok(Outcome {
        passed: report.all_passed,
        summary: format!(
            "canonical form deviation {:.3e}; first-order ratios in [{:.3}, {:.3}]",
            report.checks[0].worst, report.perturbation.min_ratio, report.perturbation.max_ratio
        ),
    })
}
