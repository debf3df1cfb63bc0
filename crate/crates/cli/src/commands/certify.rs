// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use purcool_core::density::Spectrum;
use purcool_core::hjb::{
    argmax_f, boundary_slopes, coherence_exchange_check, f_restricted, hessian_g, objective,
    ObjectiveContext, SamplerConfig, TIE_TOL,
};
use purcool_core::lambda3::{mu_gradient_check, return_function_dtau, tau_star, LambdaSystem};
use purcool_core::sampling::{birkhoff_sample, rng};
use purcool_core::spectral::DoublyStochastic;

use super::{Check, Outcome};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, write_json, Stamp};

const ARGMAX_TOL: f64 = 1e-9;
const DET_TOL: f64 = 1e-12;
const HESSIAN_FD_TOL: f64 = 1e-6;
const SLOPE_FD_TOL: f64 = 1e-8;
const GRADIENT_TOL: f64 = 1e-5;
const STATIONARITY_TOL: f64 = 1e-9;
const SLOPE_SIGN_TOL: f64 = 1e-12;
/// Finite differences of `V` need this clearance from the chamber edges and
/// from the switch time; closer in, the stencil crosses a kink.
const SMOOTH_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct Context {
    pub gamma: [f64; 2],
    pub lambda: [f64; 3],
    pub tau: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstArgmax {
    pub context: Context,
    pub best_label: String,
    pub margin: f64,
}

#[derive(Debug, Serialize)]
pub struct CertifyReport {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub command: &'static str,
    pub config: RunConfig,
    pub contexts: usize,
    pub candidates_per_context: usize,
    pub non_identity_argmax: usize,
    /// Contexts too close to a kink of `V` for the finite-difference gradient.
    pub gradient_skipped: usize,
    pub worst_argmax: Option<WorstArgmax>,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

/// Spectra `(i, j, k)/q` with `i ≥ j ≥ k` and `j ≥ 1`.
fn lattice(q: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for i in 0..=q {
        for j in 1..=i.min(q - i) {
            let k = q - i - j;
            if k <= j {
                let qf = q as f64;
                out.push([i as f64 / qf, j as f64 / qf, k as f64 / qf]);
            }
        }
    }
    out
}

/// Remaining times covering both regimes, with the switch point itself.
fn taus(ts: f64) -> Vec<f64> {
    let mut v = vec![0.0, 0.5 * ts, ts, ts + 0.05, 0.5, 1.0, 2.0];
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn contexts(
    cfg: &RunConfig,
    sys: &LambdaSystem,
) -> Result<Vec<(LambdaSystem, Context)>, CliError> {
    let mut systems = vec![*sys];
    if cfg.certify.equal_rates && sys.gamma1() != sys.gamma2() {
        systems.push(LambdaSystem::new(sys.gamma2(), sys.gamma2())?);
    }
    let mut out = Vec::new();
    for s in systems {
        for l in lattice(cfg.certify.lattice) {
            let ts = tau_star(&Spectrum::new(l.to_vec())?, &s)?;
            for tau in taus(ts) {
                out.push((
                    s,
                    Context {
                        gamma: [s.gamma1(), s.gamma2()],
                        lambda: l,
                        tau,
                    },
                ));
            }
        }
    }
    Ok(out)
}

struct Tracker {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    count: usize,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            worst: f64::NEG_INFINITY,
            count: 0,
        }
    }

    /// Records a margin that must stay at or below the tolerance.
    fn add(&mut self, margin: f64) {
        self.count += 1;
        if margin > self.worst || margin.is_nan() {
            self.worst = margin;
        }
    }

    fn finish(self) -> Check {
        Check {
            name: self.name.to_owned(),
            passed: self.count > 0 && self.worst <= self.tolerance,
            count: self.count,
            worst: self.worst,
            tolerance: self.tolerance,
        }
    }
}

fn hessian_fd_error(ctx: &ObjectiveContext, g: &[[f64; 2]; 2]) -> Result<f64, CliError> {
    let h = 1e-4;
    let mut worst = 0.0_f64;
    for (a, b) in [(0.3, 0.2), (0.1, 0.6), (0.45, 0.45)] {
        let f = |x: f64, y: f64| f_restricted(x, y, ctx);
        let f0 = f(a, b)?;
        let faa = (f(a + h, b)? - 2.0 * f0 + f(a - h, b)?) / (h * h);
        let fbb = (f(a, b + h)? - 2.0 * f0 + f(a, b - h)?) / (h * h);
        let fab = (f(a + h, b + h)? - f(a + h, b - h)? - f(a - h, b + h)? + f(a - h, b - h)?)
            / (4.0 * h * h);
        worst = worst
            .max((faa - g[0][0]).abs())
            .max((fbb - g[1][1]).abs())
            .max((fab - g[0][1]).abs());
    }
    Ok(worst)
}

pub fn certify(cfg: &RunConfig) -> Result<CertifyReport, CliError> {
    let system = cfg.validate()?;
    let sys = *system
        .lambda()
        .ok_or_else(|| CliError::Config("certify needs a Λ system (gamma1, gamma2)".into()))?;
    let samplers = SamplerConfig {
        seed: cfg.seed,
        ..cfg.certify.samplers.clone()
    };
    let actions = samplers.build(3)?;
    let list = contexts(cfg, &sys)?;

    let mut argmax = Tracker::new("argmax_identity", ARGMAX_TOL);
    let mut det = Tracker::new("hessian_determinant_identity", DET_TOL);
    let mut hess_fd = Tracker::new("hessian_finite_difference", HESSIAN_FD_TOL);
    let mut slopes = Tracker::new("boundary_slopes_nonpositive", SLOPE_SIGN_TOL);
    let mut slope_fd = Tracker::new("boundary_slopes_finite_difference", SLOPE_FD_TOL);
    let mut gradient = Tracker::new("mu_gradient", GRADIENT_TOL);
    let mut stationarity = Tracker::new("hjb_stationarity", STATIONARITY_TOL);
    let mut coherence = Tracker::new("coherence_exchange_nondecreasing", 1e-12);

    let mut ctxs = Vec::with_capacity(list.len());
    let mut non_identity = 0;
    let mut gradient_skipped = 0;
    let mut worst_argmax: Option<WorstArgmax> = None;
    for (s, c) in &list {
        let lam = Spectrum::new(c.lambda.to_vec())?;
        let mut ctx = ObjectiveContext::for_lambda_system(&lam, c.tau, s)?;
        if cfg.certify.swap_mu {
            let m = ctx.mu();
            ctx = ctx.with_mu(vec![m[2], m[1], m[0]])?;
        }

        let (theta, _, rep) = argmax_f(&ctx, &actions, TIE_TOL)?;
        argmax.add(rep.max_violation);
        if !theta.is_identity() {
            non_identity += 1;
        }
        if worst_argmax
            .as_ref()
            .is_none_or(|w| rep.max_violation > w.margin)
        {
            worst_argmax = Some(WorstArgmax {
                context: c.clone(),
                best_label: rep.best_label.clone(),
                margin: rep.max_violation,
            });
        }

        let h = hessian_g(&ctx)?;
        det.add(h.identity_residual.abs());
        hess_fd.add(hessian_fd_error(&ctx, &h.g)?);

        let (d21, d23) = boundary_slopes(&ctx)?;
        slopes.add(d21.max(d23));
        let step = 1e-6;
        let f0 = f_restricted(0.0, 0.0, &ctx)?;
        let fd21 = (f_restricted(step, 0.0, &ctx)? - f0) / step - 0.5 * h.g[0][0] * step;
        let fd23 = (f_restricted(0.0, step, &ctx)? - f0) / step - 0.5 * h.g[1][1] * step;
        slope_fd.add((fd21 - d21).abs().max((fd23 - d23).abs()));

        if !cfg.certify.swap_mu {
            let l = c.lambda;
            let smooth = l[0] - l[1] > SMOOTH_MARGIN
                && l[1] - l[2] > SMOOTH_MARGIN
                && l[2] > SMOOTH_MARGIN
                && (c.tau - tau_star(&lam, s)?).abs() > SMOOTH_MARGIN;
            if smooth {
                gradient.add(mu_gradient_check(&lam, c.tau, s)?.max_deviation);
            } else {
                gradient_skipped += 1;
            }
            let f_id = objective(&DoublyStochastic::identity(3), &ctx)?;
            stationarity.add((f_id - return_function_dtau(&lam, c.tau, s)).abs());
        }
        ctxs.push(ctx);
    }

    let mut r = rng(cfg.seed.wrapping_add(0x5eed));
    for k in 0..cfg.certify.coherence_samples {
        let ctx = &ctxs[k % ctxs.len()];
        let mut theta = DoublyStochastic::new(birkhoff_sample(&mut r, 3, 4))?;
        if theta.get(2, 0) < theta.get(0, 2) {
            theta = theta.transpose();
        }
        let rep = coherence_exchange_check(ctx, &theta)?;
        let drop = (rep.f_before - rep.f_after_first).max(rep.f_after_first - rep.f_after_second);
        coherence.add(drop);
    }

    let mut checks = vec![
        argmax.finish(),
        det.finish(),
        hess_fd.finish(),
        slopes.finish(),
        slope_fd.finish(),
    ];
    if !cfg.certify.swap_mu {
        checks.push(gradient.finish());
        checks.push(stationarity.finish());
    }
    checks.push(coherence.finish());
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(CertifyReport {
        stamp: Stamp::new(cfg),
        command: "certify",
        config: cfg.clone(),
        contexts: list.len(),
        candidates_per_context: actions.len() + 1,
        non_identity_argmax: non_identity,
        gradient_skipped,
        worst_argmax,
        checks,
        all_passed,
    })
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let report = certify(cfg)?;
    ensure_dir(&cfg.output_path)?;
    write_json(&cfg.output_path.join("certify_report.json"), &report)?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    Ok(Outcome {
        passed: report.all_passed,
        summary: if failed.is_empty() {
            format!("{} contexts, all checks passed", report.contexts)
        } else {
            format!(
                "{} contexts, failed: {}",
                report.contexts,
                failed.join(", ")
            )
        },
    })
}
