// SPDX-License-Identifier: Apache-2.0

//! Closed forms for cooling the three-level Λ system.
//!
//! Level 2 (index 1) decays to level 1 at `γ₁` and to level 3 at `γ₂`, with
//! `γ₁ ≥ γ₂`. Under the ordered-diagonal strategy the second eigenvalue decays
//! until it meets the third after the critical time `τ*`; from then on the two
//! are held equal and `λ̇₁ = (γ₁/2)(1 − λ₁)`.
//!
//! Everything here is expressed in the remaining time `τ = T − t`.

use serde::Serialize;

use crate::density::Spectrum;
use crate::error::{CoreError, Result};
use crate::lindblad::RateMatrix;
use crate::spectral::{build_generator, DoublyStochastic, SpectralGenerator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaSystem {
    gamma1: f64,
    gamma2: f64,
}

impl LambdaSystem {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        if gamma2.is_nan() || gamma2 <= 0.0 || !gamma1.is_finite() {
            return Err(CoreError::InvalidArgument(format!(
                "rates must be positive and finite (gamma1 = {gamma1}, gamma2 = {gamma2})"
            )));
        }
        if gamma1 < gamma2 {
            return Err(CoreError::InvalidArgument(format!(
                "gamma1 = {gamma1} must be at least gamma2 = {gamma2}"
            )));
        }
        Ok(Self { gamma1, gamma2 })
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    fn total(&self) -> f64 {
        self.gamma1 + self.gamma2
    }

    pub fn rates(&self) -> RateMatrix {
        RateMatrix::lambda(self.gamma1, self.gamma2).expect("validated rates")
    }

    pub fn generator(&self) -> SpectralGenerator {
        build_generator(&self.rates())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `τ ≤ τ*`: the two lower eigenvalues never meet before the end.
    PreEqualization,
    /// `τ > τ*`: they meet and are held equal thereafter.
    Equalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    pub tau: f64,
    pub tau_star: f64,
    pub regime: Regime,
}

fn as3(lambda: &Spectrum) -> [f64; 3] {
    assert_eq!(lambda.len(), 3, "Λ-system spectra have three entries");
    [lambda[0], lambda[1], lambda[2]]
}

fn require3(lambda: &Spectrum) -> Result<[f64; 3]> {
    if lambda.len() != 3 {
        return Err(CoreError::DimensionMismatch {
            expected: 3,
            found: lambda.len(),
        });
    }
    Ok(as3(lambda))
}

/// Unclamped `τ*`; negative when `λ₃ > λ₂`.
fn tau_star_raw(l: &[f64; 3], sys: &LambdaSystem) -> f64 {
    let (g1, g2) = (sys.gamma1, sys.gamma2);
    let g = g1 + g2;
    -((l[1] * g2 + l[2] * g) / (l[1] * (g1 + 2.0 * g2))).ln() / g
}

fn lambda2_at_tau_star_raw(l: &[f64; 3], sys: &LambdaSystem) -> f64 {
    (sys.gamma2 * l[1] + sys.total() * l[2]) / (sys.gamma1 + 2.0 * sys.gamma2)
}

/// Time for `λ₂` and `λ₃` to meet under the ordered-diagonal strategy.
pub fn tau_star(lambda: &Spectrum, sys: &LambdaSystem) -> Result<f64> {
    let l = require3(lambda)?;
    if l[1] == 0.0 {
        return Err(CoreError::DegenerateInput(
            "critical time is undefined for a vanishing second eigenvalue".into(),
        ));
    }
    Ok(tau_star_raw(&l, sys).max(0.0))
}

/// Common value of `λ₂` and `λ₃` at the moment they meet.
pub fn lambda2_at_tau_star(lambda: &Spectrum, sys: &LambdaSystem) -> Result<f64> {
    let l = require3(lambda)?;
    if l[1] == 0.0 {
        return Err(CoreError::DegenerateInput(
            "critical time is undefined for a vanishing second eigenvalue".into(),
        ));
    }
    Ok(lambda2_at_tau_star_raw(&l, sys))
}

pub fn regime(lambda: &Spectrum, tau: f64, sys: &LambdaSystem) -> Result<RegimeReport> {
    let tau_star = tau_star(lambda, sys)?;
    let regime = if tau <= tau_star {
        Regime::PreEqualization
    } else {
        Regime::Equalized
    };
    Ok(RegimeReport {
        tau,
        tau_star,
        regime,
    })
}

fn return_function_raw(l: &[f64; 3], tau: f64, sys: &LambdaSystem) -> f64 {
    if l[1] == 0.0 {
        return l[0];
    }
    let g = sys.total();
    let ts = tau_star_raw(l, sys);
    if tau <= ts {
        l[0] + sys.gamma1 / g * l[1] * (1.0 - (-g * tau).exp())
    } else {
        let c = lambda2_at_tau_star_raw(l, sys);
        1.0 - 2.0 * c * (-0.5 * sys.gamma1 * (tau - ts)).exp()
    }
}

/// Final purity `V(λ, T − τ)` reached by the ordered-diagonal strategy with
/// `τ` time remaining.
///
/// Panics if `lambda` does not have three entries.
pub fn return_function(lambda: &Spectrum, tau: f64, sys: &LambdaSystem) -> f64 {
    return_function_raw(&as3(lambda), tau.max(0.0), sys)
}

/// `∂V/∂τ` of [`return_function`].
pub fn return_function_dtau(lambda: &Spectrum, tau: f64, sys: &LambdaSystem) -> f64 {
    let l = as3(lambda);
    if l[1] == 0.0 {
        return 0.0;
    }
    let g = sys.total();
    let ts = tau_star_raw(&l, sys);
    if tau <= ts {
        sys.gamma1 * l[1] * (-g * tau).exp()
    } else {
        let c = lambda2_at_tau_star_raw(&l, sys);
        sys.gamma1 * c * (-0.5 * sys.gamma1 * (tau - ts)).exp()
    }
}

fn mu_raw(l: &[f64; 3], tau: f64, sys: &LambdaSystem) -> [f64; 3] {
    let (g1, g2) = (sys.gamma1, sys.gamma2);
    let g = g1 + g2;
    let ts = tau_star_raw(l, sys);
    if tau <= ts {
        [1.0, g1 / g * (1.0 - (-g * tau).exp()), 0.0]
    } else {
        let decay = (-0.5 * g1 * (tau - ts)).exp();
        let mu2 = -(2.0 * g2 * l[1] + g1 * l[2]) / (l[1] * (g1 + 2.0 * g2)) * decay;
        [0.0, mu2, -decay]
    }
}

/// Co-state `μ = ∂V/∂λ` in the gauge used by the closed forms (`μ₃ = 0`
/// before equalization, `μ₁ = 0` after).
pub fn mu(lambda: &Spectrum, tau: f64, sys: &LambdaSystem) -> Result<[f64; 3]> {
    let l = require3(lambda)?;
    if l[1] == 0.0 {
        if tau == 0.0 {
            return Ok([1.0, 0.0, 0.0]);
        }
        return Err(CoreError::DegenerateInput(
            "co-state is undefined for a vanishing second eigenvalue".into(),
        ));
    }
    Ok(mu_raw(&l, tau, sys))
}

/// Control returned by the ordered-diagonal strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyDecision {
    pub theta: DoublyStochastic,
    pub order_maintaining: bool,
}

/// Keep ρ diagonal (`Θ = I`) and the eigenvalues in descending order.
pub fn greedy_policy(lambda: &Spectrum) -> GreedyDecision {
    GreedyDecision {
        theta: DoublyStochastic::identity(lambda.len()),
        order_maintaining: true,
    }
}

/// Spectrum reached after running the ordered-diagonal strategy for a
/// forward time `t` from `lambda`.
pub fn greedy_closed_form(lambda: &Spectrum, t: f64, sys: &LambdaSystem) -> [f64; 3] {
    let l = as3(lambda);
    if l[1] == 0.0 {
        return l;
    }
    let g = sys.total();
    let ts = tau_star_raw(&l, sys).max(0.0);
    if t <= ts {
        let lost = l[1] * (1.0 - (-g * t).exp());
        [
            l[0] + sys.gamma1 / g * lost,
            l[1] - lost,
            l[2] + sys.gamma2 / g * lost,
        ]
    } else {
        let c = lambda2_at_tau_star_raw(&l, sys);
        let rest = 2.0 * c * (-0.5 * sys.gamma1 * (t - ts)).exp();
        [1.0 - rest, 0.5 * rest, 0.5 * rest]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    pub analytic: [f64; 3],
    /// Finite-difference gradient, gauge-aligned so its last entry equals the
    /// analytic one.
    pub finite_difference: [f64; 3],
    pub max_deviation: f64,
    pub step: f64,
}

/// Compares `μ` with central differences of `V` along the simplex tangent
/// directions `eᵢ − e₃`, which are blind to the uniform shift of `μ`.
pub fn mu_gradient_check(
    lambda: &Spectrum,
    tau: f64,
    sys: &LambdaSystem,
) -> Result<GradientReport> {
    const STEP: f64 = 1e-5;
    let analytic = mu(lambda, tau, sys)?;
    let l = as3(lambda);
    let mut fd = [0.0; 3];
    fd[2] = analytic[2];
    for i in 0..2 {
        let mut plus = l;
        let mut minus = l;
        plus[i] += STEP;
        plus[2] -= STEP;
        minus[i] -= STEP;
        minus[2] += STEP;
        let slope = (return_function_raw(&plus, tau, sys) - return_function_raw(&minus, tau, sys))
            / (2.0 * STEP);
        fd[i] = analytic[2] + slope;
    }
    let max_deviation = (0..3)
        .map(|k| (fd[k] - analytic[k]).abs())
        .fold(0.0, f64::max);
    Ok(GradientReport {
        analytic,
        finite_difference: fd,
        max_deviation,
        step: STEP,
    })
}
