// SPDX-License-Identifier: Apache-2.0

//! Hamilton–Jacobi–Bellman verification of spectral cooling strategies.
//!
//! The optimal control at `(λ, t)` maximises
//! `F(Θ) = μᵀ(ΘᵀBΘ + Θᵀ∘D)λ` with `μ = ∂V/∂λ`. Because `1ᵀΘ = 1ᵀ` and
//! `1ᵀA = 0`, `F` vanishes for `μ = 1` and is unchanged by adding a constant
//! to every component of `μ`.
//!
//! For the three-level Λ system the module also exposes the pieces of the
//! optimality argument (two-parameter reduction, its Hessian, the boundary
//! slopes at the identity and the coherence-eliminating exchange moves) so
//! each can be checked numerically, plus a dynamic-programming solver that
//! recovers `V` independently.

mod dp;
mod samplers;

pub use dp::{compare_with_analytic, dp_solve, DpComparison, ValueTable};
pub use samplers::{
    sampler_registry, ActionSet, BirkhoffMixtures, Candidate, Family, HaarUnistochastic,
    PermutationVertices, SamplerConfig, ThetaSampler, TriangleGrid,
};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::density::Spectrum;
use crate::error::{CoreError, Result};
use crate::lambda3::{self, LambdaSystem};
use crate::spectral::{DoublyStochastic, SpectralGenerator};

/// Default tie tolerance for [`argmax_f`].
pub const TIE_TOL: f64 = 1e-9;

/// Co-state, spectrum and generator at one `(λ, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveContext {
    mu: Vec<f64>,
    lambda: Vec<f64>,
    gen: SpectralGenerator,
}

impl ObjectiveContext {
    pub fn new(mu: Vec<f64>, lambda: Vec<f64>, gen: SpectralGenerator) -> Result<Self> {
        for len in [mu.len(), lambda.len()] {
            if len != gen.dim() {
                return Err(CoreError::DimensionMismatch {
                    expected: gen.dim(),
                    found: len,
                });
            }
        }
        Ok(Self { mu, lambda, gen })
    }

    /// Context built from the Λ-system closed-form co-state.
    pub fn for_lambda_system(lambda: &Spectrum, tau: f64, sys: &LambdaSystem) -> Result<Self> {
        let mu = lambda3::mu(lambda, tau, sys)?;
        Self::new(mu.to_vec(), lambda.values().to_vec(), sys.generator())
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn generator(&self) -> &SpectralGenerator {
        &self.gen
    }

    pub fn with_mu(&self, mu: Vec<f64>) -> Result<Self> {
        Self::new(mu, self.lambda.clone(), self.gen.clone())
    }

    /// Adds `c` to every component of `μ`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            mu: self.mu.iter().map(|m| m + c).collect(),
            ..self.clone()
        }
    }

    /// Shifts `μ` so that component `k` vanishes.
    pub fn in_gauge(&self, k: usize) -> Self {
        self.shifted(-self.mu[k])
    }

    /// `F(I)` with `μ` replaced by the all-ones vector; zero up to rounding.
    pub fn null_direction_residual(&self) -> f64 {
        let ones = Self {
            mu: vec![1.0; self.mu.len()],
            ..self.clone()
        };
        objective(&DoublyStochastic::identity(self.mu.len()), &ones).unwrap_or(f64::NAN)
    }

    /// `(γ₁, γ₂)` if the generator has the Λ-system structure.
    fn lambda_rates(&self) -> Result<(f64, f64)> {
        let b = self.gen.b();
        if self.gen.dim() != 3 {
            return Err(CoreError::DimensionMismatch {
                expected: 3,
                found: self.gen.dim(),
            });
        }
        let extra = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| !matches!((i, j), (0, 1) | (2, 1)))
            .any(|(i, j)| b[(i, j)] != 0.0);
        if extra {
            return Err(CoreError::DomainViolation(
                "generator does not have the Λ-system structure".into(),
            ));
        }
        Ok((b[(0, 1)], b[(2, 1)]))
    }
}

/// `F(Θ) = μᵀ(ΘᵀBΘ + Θᵀ∘D)λ`.
pub fn objective(theta: &DoublyStochastic, ctx: &ObjectiveContext) -> Result<f64> {
    let m = ctx.gen.m_matrix(theta)?;
    let mut total = 0.0;
    for i in 0..m.nrows() {
        let row: f64 = (0..m.ncols()).map(|j| m[(i, j)] * ctx.lambda[j]).sum();
        total += ctx.mu[i] * row;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub family: String,
    pub count: usize,
    pub best_label: String,
    pub best_value: f64,
    /// Up to three largest values, descending.
    pub top_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgmaxReport {
    pub f_identity: f64,
    pub best_label: String,
    pub best_value: f64,
    /// `max F(Θ) − F(I)` over every candidate.
    pub max_violation: f64,
    pub families: Vec<FamilyReport>,
    /// Every candidate within the tie tolerance of the best value.
    pub ties: Vec<String>,
}

/// Maximises `F` over the identity and every candidate of `actions`.
///
/// Candidates within `tie_tol` of the maximum are ties; the identity wins a
/// tie, otherwise the lexicographically smallest matrix (row-major) does.
pub fn argmax_f(
    ctx: &ObjectiveContext,
    actions: &ActionSet,
    tie_tol: f64,
) -> Result<(DoublyStochastic, f64, ArgmaxReport)> {
    let n = ctx.gen.dim();
    let identity = DoublyStochastic::identity(n);
    let f_identity = objective(&identity, ctx)?;

    let mut scored: Vec<(String, &DoublyStochastic, f64)> =
        vec![("identity".into(), &identity, f_identity)];
    let mut families = Vec::new();
    for fam in &actions.families {
        let mut values = Vec::with_capacity(fam.candidates.len());
        for c in &fam.candidates {
            let f = objective(&c.theta, ctx)?;
            values.push(f);
            scored.push((c.label.clone(), &c.theta, f));
        }
        let best = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| (fam.candidates[k].label.clone(), *v));
        let mut top = values.clone();
        top.sort_by(|a, b| b.total_cmp(a));
        top.truncate(3);
        families.push(FamilyReport {
            family: fam.name.clone(),
            count: fam.candidates.len(),
            best_label: best.as_ref().map(|b| b.0.clone()).unwrap_or_default(),
            best_value: best.map_or(f64::NEG_INFINITY, |b| b.1),
            top_values: top,
        });
    }

    let best_value = scored.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<&(String, &DoublyStochastic, f64)> = scored
        .iter()
        .filter(|s| s.2 >= best_value - tie_tol)
        .collect();
    let winner = if ties.iter().any(|s| s.1.is_identity()) {
        ties.iter().find(|s| s.1.is_identity()).unwrap()
    } else {
        ties.iter()
            .min_by(|a, b| lexicographic(a.1.matrix(), b.1.matrix()))
            .unwrap()
    };

    let report = ArgmaxReport {
        f_identity,
        best_label: winner.0.clone(),
        best_value: winner.2,
        max_violation: best_value - f_identity,
        families,
        ties: ties.iter().map(|s| s.0.clone()).collect(),
    };
    Ok((winner.1.clone(), winner.2, report))
}

fn lexicographic(a: &DMatrix<f64>, b: &DMatrix<f64>) -> std::cmp::Ordering {
    let rows_a = a.transpose();
    let rows_b = b.transpose();
    for (x, y) in rows_a.iter().zip(rows_b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

const DOMAIN_TOL: f64 = 1e-12;

/// The doubly stochastic matrix with `Θ₁₃ = Θ₃₁ = 0`, `Θ₂₁ = a`, `Θ₂₃ = b`:
///
/// ```text
/// [1−a    a      0 ]
/// [ a   1−a−b    b ]
/// [ 0     b    1−b ]
/// ```
pub fn embedded_theta(a: f64, b: f64) -> Result<DoublyStochastic> {
    check_triangle(a, b)?;
    let m = DMatrix::from_row_slice(3, 3, &[1.0 - a, a, 0.0, a, 1.0 - a - b, b, 0.0, b, 1.0 - b]);
    DoublyStochastic::new(m)
}

fn check_triangle(a: f64, b: f64) -> Result<()> {
    if a < -DOMAIN_TOL
        || b < -DOMAIN_TOL
        || a + b > 1.0 + DOMAIN_TOL
        || !a.is_finite()
        || !b.is_finite()
    {
        return Err(CoreError::DomainViolation(format!(
            "(θ21, θ23) = ({a}, {b}) outside the triangle"
        )));
    }
    Ok(())
}

/// `F` on the two-parameter family of [`embedded_theta`], written out in the
/// `μ₂ = 0` gauge.
pub fn f_restricted(a: f64, b: f64, ctx: &ObjectiveContext) -> Result<f64> {
    check_triangle(a, b)?;
    let (g1, g2) = ctx.lambda_rates()?;
    let g = ctx.in_gauge(1);
    let (m1, m3) = (g.mu[0], g.mu[2]);
    let l = &ctx.lambda;
    let gain = g1 * m1 * (1.0 - a) + g2 * m3 * (1.0 - b);
    let occupancy = l[1] + a * (l[0] - l[1]) + b * (l[2] - l[1]);
    Ok(gain * occupancy - (g1 + g2) * (m1 * a * l[0] + m3 * b * l[2]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianReport {
    /// `∂²F/∂Θ₂ᵢ∂Θ₂ⱼ` for `i, j ∈ {1, 3}`.
    pub g: [[f64; 2]; 2],
    pub det: f64,
    pub a: f64,
    pub b: f64,
    /// `det G + (a − b)²`; zero for every context.
    pub identity_residual: f64,
}

/// Hessian of [`f_restricted`] (constant, since `F` is quadratic).
pub fn hessian_g(ctx: &ObjectiveContext) -> Result<HessianReport> {
    let (g1, g2) = ctx.lambda_rates()?;
    let gauged = ctx.in_gauge(1);
    let (m1, m3) = (gauged.mu[0], gauged.mu[2]);
    let l = &ctx.lambda;
    let g11 = -2.0 * (l[0] - l[1]) * m1 * g1;
    let g33 = -2.0 * (l[2] - l[1]) * m3 * g2;
    let g13 = -m1 * (l[2] - l[1]) * g1 - m3 * (l[0] - l[1]) * g2;
    let a = g1 * m1 * (l[2] - l[1]);
    let b = g2 * m3 * (l[0] - l[1]);
    let det = g11 * g33 - g13 * g13;
    Ok(HessianReport {
        g: [[g11, g13], [g13, g33]],
        det,
        a,
        b,
        identity_residual: det + (a - b) * (a - b),
    })
}

/// `(∂F/∂Θ₂₁, ∂F/∂Θ₂₃)` at the identity, in the `μ₂ = 0` gauge.
pub fn boundary_slopes(ctx: &ObjectiveContext) -> Result<(f64, f64)> {
    let (g1, g2) = ctx.lambda_rates()?;
    let gauged = ctx.in_gauge(1);
    let (m1, m3) = (gauged.mu[0], gauged.mu[2]);
    let l = &ctx.lambda;
    let gain = m3 * g2 + m1 * g1;
    let d21 = (l[0] - l[1]) * gain - l[1] * m1 * g1 - (g1 + g2) * m1 * l[0];
    let d23 = (l[2] - l[1]) * gain - l[1] * m3 * g2 - (g1 + g2) * m3 * l[2];
    Ok((d21, d23))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub f_before: f64,
    pub f_after_first: f64,
    pub f_after_second: f64,
    pub delta_first: f64,
    pub delta_second: f64,
    pub theta_after: Vec<Vec<f64>>,
}

impl CoherenceReport {
    pub fn nondecreasing(&self, tol: f64) -> bool {
        self.f_after_first >= self.f_before - tol && self.f_after_second >= self.f_after_first - tol
    }
}

/// Applies the two exchange moves that clear the ground-state coherences
/// `Θ₁₃` and `Θ₃₁` and records `F` after each:
///
/// 1. with `Δ = Θ₁₃`: `Θ₁₁, Θ₃₃ += Δ` and `Θ₁₃, Θ₃₁ −= Δ`;
/// 2. with `Δ₁` the remaining `Θ₃₁`: `Θ₁₁, Θ₃₂ += Δ₁` and `Θ₃₁, Θ₁₂ −= Δ₁`.
///
/// Requires `Θ₃₁ ≥ Θ₁₃`; otherwise the first move leaves `[0, 1]`.
pub fn coherence_exchange_check(
    ctx: &ObjectiveContext,
    theta: &DoublyStochastic,
) -> Result<CoherenceReport> {
    ctx.lambda_rates()?;
    if theta.dim() != 3 {
        return Err(CoreError::DimensionMismatch {
            expected: 3,
            found: theta.dim(),
        });
    }
    let f_before = objective(theta, ctx)?;
    let mut m = theta.matrix().clone();

    let delta_first = m[(0, 2)];
    m[(0, 0)] += delta_first;
    m[(2, 2)] += delta_first;
    m[(0, 2)] -= delta_first;
    m[(2, 0)] -= delta_first;
    let first = moved(m.clone(), "first")?;
    let f_after_first = objective(&first, ctx)?;

    let delta_second = m[(2, 0)];
    m[(0, 0)] += delta_second;
    m[(2, 1)] += delta_second;
    m[(2, 0)] -= delta_second;
    m[(0, 1)] -= delta_second;
    let second = moved(m, "second")?;
    let f_after_second = objective(&second, ctx)?;

    Ok(CoherenceReport {
        f_before,
        f_after_first,
        f_after_second,
        delta_first,
        delta_second,
        theta_after: (0..3)
            .map(|i| (0..3).map(|j| second.get(i, j)).collect())
            .collect(),
    })
}

fn moved(mut m: DMatrix<f64>, which: &str) -> Result<DoublyStochastic> {
    if let Some(x) = m
        .iter()
        .find(|&&x| !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&x))
    {
        return Err(CoreError::DomainViolation(format!(
            "{which} exchange move produced entry {x}"
        )));
    }
    m.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    DoublyStochastic::new(m)
}
