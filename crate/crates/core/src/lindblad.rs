// SPDX-License-Identifier: Apache-2.0

//! Full-matrix Liouville–von Neumann dynamics.
//!
//! Dissipation is spontaneous emission only: jump operators `√γᵢⱼ |i⟩⟨j|`.
//! Hamiltonian control enters exclusively as instantaneous unitary kicks
//! `ρ ← U ρ U†` applied at scheduled times; between kicks `ρ̇ = L(ρ)` is
//! integrated with classical fixed-step RK4.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::density::{eigh, hermitian_deviation, CMatrix, DensityMatrix};
use crate::error::{CoreError, Result};
use crate::sampling;

/// Unitarity tolerance on `max |U†U − I|`.
pub const UNITARY_TOL: f64 = 1e-10;

/// Invariant tolerances enforced on every emitted trajectory state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationTolerances {
    pub trace: f64,
    pub psd: f64,
    pub herm: f64,
}

impl Default for PropagationTolerances {
    fn default() -> Self {
        Self {
            trace: 1e-8,
            psd: 1e-8,
            herm: 1e-10,
        }
    }
}

/// Spontaneous-emission rates; `gamma[(i, j)]` is the rate from level `j`
/// to level `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    gamma: DMatrix<f64>,
}

impl RateMatrix {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        if gamma.nrows() != gamma.ncols() {
            return Err(CoreError::NotSquare {
                rows: gamma.nrows(),
                cols: gamma.ncols(),
            });
        }
        for i in 0..gamma.nrows() {
            for j in 0..gamma.ncols() {
                let g = gamma[(i, j)];
                if !g.is_finite() || g < 0.0 {
                    return Err(CoreError::InvalidRates(format!(
                        "rate ({i},{j}) = {g} must be finite and nonnegative"
                    )));
                }
                if i == j && g != 0.0 {
                    return Err(CoreError::InvalidRates(format!(
                        "diagonal rate ({i},{i}) = {g} must be zero"
                    )));
                }
            }
        }
        Ok(Self { gamma })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(CoreError::NotSquare {
                rows: n,
                cols: r.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Three-level Λ system: level 2 decays to level 1 at `gamma1` and to
    /// level 3 at `gamma2` (levels are 0-indexed internally).
    pub fn lambda(gamma1: f64, gamma2: f64) -> Result<Self> {
        let mut g = DMatrix::zeros(3, 3);
        g[(0, 1)] = gamma1;
        g[(2, 1)] = gamma2;
        Self::new(g)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            gamma: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.gamma[(to, from)]
    }

    pub fn max_rate(&self) -> f64 {
        self.gamma.iter().copied().fold(0.0, f64::max)
    }

    /// Total decay rate out of each level, `Γⱼ = Σᵢ γᵢⱼ`.
    pub fn total_decay(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.gamma.column(j).sum())
            .collect()
    }

    /// Default integration step `1e-3 / max γ` (or `1e-3` with no decay).
    pub fn default_dt(&self) -> f64 {
        let g = self.max_rate();
        if g > 0.0 {
            1e-3 / g
        } else {
            1e-3
        }
    }
}

pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n)).camax()
}

pub fn check_unitary(u: &CMatrix) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(CoreError::NotSquare {
            rows: u.nrows(),
            cols: u.ncols(),
        });
    }
    let dev = unitarity_deviation(u);
    if dev > UNITARY_TOL {
        return Err(CoreError::NotUnitary { deviation: dev });
    }
    Ok(())
}

/// `L(ρ)` on an arbitrary square matrix, using the closed form
/// `L(ρ)ₐᵦ = δₐᵦ Σⱼ γₐⱼ ρⱼⱼ − ½(Γₐ + Γᵦ) ρₐᵦ`.
pub(crate) fn dissipator_raw(rho: &CMatrix, rates: &RateMatrix) -> CMatrix {
    let n = rho.nrows();
    let out_rate = rates.total_decay();
    let mut out = CMatrix::from_fn(n, n, |a, b| {
        rho[(a, b)] * (-0.5 * (out_rate[a] + out_rate[b]))
    });
    for a in 0..n {
        let gain: f64 = (0..n).map(|j| rates.get(a, j) * rho[(j, j)].re).sum();
        out[(a, a)] += Complex64::new(gain, 0.0);
    }
    out
}

/// Lindblad dissipator `Σᵢⱼ γᵢⱼ (Eᵢⱼ ρ Eᵢⱼ† − ½{Eᵢⱼ†Eᵢⱼ, ρ})`.
pub fn dissipator(rho: &DensityMatrix, rates: &RateMatrix) -> Result<CMatrix> {
    if rho.dim() != rates.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: rates.dim(),
            found: rho.dim(),
        });
    }
    Ok(dissipator_raw(rho.matrix(), rates))
}

/// `U ρ U†`.
pub fn apply_unitary(rho: &DensityMatrix, u: &CMatrix) -> Result<DensityMatrix> {
    check_unitary(u)?;
    if u.nrows() != rho.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: rho.dim(),
            found: u.nrows(),
        });
    }
    Ok(DensityMatrix::from_unchecked(
        u * rho.matrix() * u.adjoint(),
    ))
}

/// Deterministic Haar-random `n×n` unitary for the given seed.
pub fn haar_unitary(n: usize, seed: u64) -> CMatrix {
    sampling::haar_unitary_from(&mut sampling::rng(seed), n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kick {
    pub time: f64,
    pub unitary: CMatrix,
}

/// Instantaneous unitary kicks at strictly increasing times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlSchedule {
    kicks: Vec<Kick>,
}

impl ControlSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(kicks: Vec<Kick>) -> Result<Self> {
        for k in &kicks {
            if !k.time.is_finite() {
                return Err(CoreError::InvalidArgument(
                    "kick time must be finite".into(),
                ));
            }
            check_unitary(&k.unitary)?;
        }
        if let Some(w) = kicks.windows(2).find(|w| w[1].time <= w[0].time) {
            return Err(CoreError::InvalidArgument(format!(
                "kick times must be strictly increasing ({} then {})",
                w[0].time, w[1].time
            )));
        }
        if let Some(w) = kicks
            .windows(2)
            .find(|w| w[1].unitary.nrows() != w[0].unitary.nrows())
        {
            return Err(CoreError::DimensionMismatch {
                expected: w[0].unitary.nrows(),
                found: w[1].unitary.nrows(),
            });
        }
        Ok(Self { kicks })
    }

    pub fn kicks(&self) -> &[Kick] {
        &self.kicks
    }
}

fn rk4_step(rho: &CMatrix, rates: &RateMatrix, h: f64) -> CMatrix {
    let half = Complex64::new(0.5 * h, 0.0);
    let full = Complex64::new(h, 0.0);
    let k1 = dissipator_raw(rho, rates);
    let k2 = dissipator_raw(&(rho + &k1 * half), rates);
    let k3 = dissipator_raw(&(rho + &k2 * half), rates);
    let k4 = dissipator_raw(&(rho + &k3 * full), rates);
    rho + (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
        * Complex64::new(h / 6.0, 0.0)
}

fn check_state(rho: &CMatrix, time: f64, tol: &PropagationTolerances) -> Result<()> {
    let drift = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
    if drift > tol.trace {
        return Err(CoreError::InvariantViolation {
            time,
            detail: format!("trace drift {drift:e}"),
        });
    }
    let herm = hermitian_deviation(rho);
    if herm > tol.herm {
        return Err(CoreError::InvariantViolation {
            time,
            detail: format!("Hermiticity deviation {herm:e}"),
        });
    }
    let (values, _) = eigh(rho)?;
    let min = values.last().copied().unwrap_or(0.0);
    if min < -tol.psd {
        return Err(CoreError::InvariantViolation {
            time,
            detail: format!("eigenvalue {min:e}"),
        });
    }
    Ok(())
}

/// Integrates `ρ̇ = L(ρ)` from `t = 0` to `t_final`, applying each kick at its
/// scheduled time. Steps are shortened so that kicks and `t_final` are hit
/// exactly. The returned trajectory starts with the (post-kick) initial state
/// and holds one entry per step.
pub fn propagate(
    rho0: &DensityMatrix,
    rates: &RateMatrix,
    schedule: &ControlSchedule,
    t_final: f64,
    dt: f64,
) -> Result<Vec<(f64, DensityMatrix)>> {
    propagate_with(
        rho0,
        rates,
        schedule,
        t_final,
        dt,
        &PropagationTolerances::default(),
    )
}

pub fn propagate_with(
    rho0: &DensityMatrix,
    rates: &RateMatrix,
    schedule: &ControlSchedule,
    t_final: f64,
    dt: f64,
    tol: &PropagationTolerances,
) -> Result<Vec<(f64, DensityMatrix)>> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !t_final.is_finite() || t_final < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "horizon must be nonnegative, got {t_final}"
        )));
    }
    let n = rho0.dim();
    if rates.dim() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            found: rates.dim(),
        });
    }
    let kicks = schedule.kicks();
    if let Some(k) = kicks.iter().find(|k| k.time < 0.0 || k.time > t_final) {
        return Err(CoreError::InvalidArgument(format!(
            "kick at t = {} lies outside [0, {t_final}]",
            k.time
        )));
    }
    if let Some(k) = kicks.iter().find(|k| k.unitary.nrows() != n) {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            found: k.unitary.nrows(),
        });
    }

    let snap = 1e-12 * t_final.max(1.0);
    let mut rho = rho0.matrix().clone();
    let mut t = 0.0;
    let mut next_kick = 0;
    let apply_due = |rho: &mut CMatrix, t: f64, next_kick: &mut usize| {
        while *next_kick < kicks.len() && kicks[*next_kick].time <= t + snap {
            let u = &kicks[*next_kick].unitary;
            *rho = u * &*rho * u.adjoint();
            *next_kick += 1;
        }
    };

    apply_due(&mut rho, t, &mut next_kick);
    check_state(&rho, t, tol)?;
    let mut out = vec![(t, DensityMatrix::from_unchecked(rho.clone()))];

    while t < t_final - snap {
        let stop = kicks
            .get(next_kick)
            .map_or(t_final, |k| k.time.min(t_final));
        let remaining = stop - t;
        let (h, t_next) = if remaining <= dt + snap {
            (remaining, stop)
        } else {
            (dt, t + dt)
        };
        rho = rk4_step(&rho, rates, h);
        t = t_next;
        apply_due(&mut rho, t, &mut next_kick);
        check_state(&rho, t, tol)?;
        out.push((t, DensityMatrix::from_unchecked(rho.clone())));
    }
    Ok(out)
}
