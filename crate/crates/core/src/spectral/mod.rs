// SPDX-License-Identifier: Apache-2.0

//! Reduced equation of motion for the spectrum under complete unitary control.
//!
//! With `ρ = U Λ U†` and `Θᵢⱼ = |Uᵢⱼ|²`, the eigenvalues evolve as
//! `λ̇ = (ΘᵀBΘ + Θᵀ∘D) λ`, where `A = B + D` is the population generator of
//! the bare system split into its off-diagonal gains `B` and diagonal losses
//! `D`, and `Θᵀ∘D` is the diagonal matrix with diagonal `Θᵀ diag(D)`.

mod policy;

pub use policy::{
    policy_registry, FixedPolicy, GreedyPolicy, IdentityPolicy, Policy, SchedulePolicy,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::density::{eigh, sort_descending, CMatrix};
use crate::error::{CoreError, Result};
use crate::lindblad::{check_unitary, dissipator_raw, RateMatrix};
use crate::sampling::permutation_matrix;

/// Row/column-sum tolerance for control matrices.
pub const THETA_TOL: f64 = 1e-10;

/// Simplex tolerance enforced on every emitted spectral state.
pub const SIMPLEX_TOL: f64 = 1e-8;

/// `A = B + D` built from a rate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGenerator {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    d: DVector<f64>,
}

impl SpectralGenerator {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Q-matrix: `Aᵢⱼ = γᵢⱼ` off the diagonal, `Aᵢᵢ = −Σₖ γₖᵢ`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Diagonal of `D` as a vector.
    pub fn d_diag(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn d(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.d)
    }

    /// `M = ΘᵀBΘ + Θᵀ∘D`.
    pub fn m_matrix(&self, theta: &DoublyStochastic) -> Result<DMatrix<f64>> {
        self.check_dim(theta.dim())?;
        let t = theta.matrix();
        let mut m = t.transpose() * &self.b * t;
        let shifted = t.transpose() * &self.d;
        for k in 0..self.dim() {
            m[(k, k)] += shifted[k];
        }
        Ok(m)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

pub fn build_generator(rates: &RateMatrix) -> SpectralGenerator {
    let n = rates.dim();
    let b = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rates.get(i, j) });
    let d = DVector::from_vec(rates.total_decay().into_iter().map(|g| -g).collect());
    let mut a = b.clone();
    for k in 0..n {
        a[(k, k)] = d[k];
    }
    SpectralGenerator { a, b, d }
}

/// Nonnegative matrix with unit row and column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochastic {
    theta: DMatrix<f64>,
}

impl DoublyStochastic {
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        if theta.nrows() != theta.ncols() {
            return Err(CoreError::NotSquare {
                rows: theta.nrows(),
                cols: theta.ncols(),
            });
        }
        let n = theta.nrows();
        if let Some(x) = theta
            .iter()
            .find(|&&x| !(-THETA_TOL..=1.0 + THETA_TOL).contains(&x))
        {
            return Err(CoreError::NotDoublyStochastic {
                detail: format!("entry {x} outside [0, 1]"),
            });
        }
        for k in 0..n {
            let r = theta.row(k).sum();
            let c = theta.column(k).sum();
            if (r - 1.0).abs() > THETA_TOL || (c - 1.0).abs() > THETA_TOL {
                return Err(CoreError::NotDoublyStochastic {
                    detail: format!("row {k} sums to {r}, column {k} sums to {c}"),
                });
            }
        }
        Ok(Self { theta })
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

    pub fn identity(n: usize) -> Self {
        Self {
            theta: DMatrix::identity(n, n),
        }
    }

    pub fn permutation(perm: &[usize]) -> Self {
        Self {
            theta: permutation_matrix(perm),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.theta[(i, j)]
    }

    pub fn transpose(&self) -> Self {
        Self {
            theta: self.theta.transpose(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.theta == DMatrix::identity(self.dim(), self.dim())
    }

    /// Every entry is exactly 0 or 1.
    pub fn is_permutation(&self) -> bool {
        self.theta.iter().all(|&x| x == 0.0 || x == 1.0)
    }
}

/// `Θᵢⱼ = |Uᵢⱼ|²`.
pub fn theta_from_unitary(u: &CMatrix) -> Result<DoublyStochastic> {
    check_unitary(u)?;
    let n = u.nrows();
    DoublyStochastic::new(DMatrix::from_fn(n, n, |i, j| u[(i, j)].norm_sqr()))
}

/// Diagonal matrix with diagonal `Θᵀ diag(D)`.
pub fn theta_compose_d(theta: &DoublyStochastic, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if d.nrows() != theta.dim() || d.ncols() != theta.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: theta.dim(),
            found: d.nrows(),
        });
    }
    let shifted = theta.matrix().transpose() * d.diagonal();
    Ok(DMatrix::from_diagonal(&shifted))
}

/// `M λ` with `M = ΘᵀBΘ + Θᵀ∘D`.
pub fn spectral_rhs(
    lambda: &[f64],
    theta: &DoublyStochastic,
    gen: &SpectralGenerator,
) -> Result<Vec<f64>> {
    gen.check_dim(lambda.len())?;
    let m = gen.m_matrix(theta)?;
    Ok((m * DVector::from_column_slice(lambda)).as_slice().to_vec())
}

/// `diag(U† L(U Λ U†) U)` evaluated directly on the full density matrix.
pub fn spectral_rhs_oracle(lambda: &[f64], u: &CMatrix, rates: &RateMatrix) -> Result<Vec<f64>> {
    check_unitary(u)?;
    let n = rates.dim();
    if lambda.len() != n || u.nrows() != n {
        return Err(CoreError::DimensionMismatch {
            expected: n,
            found: if lambda.len() != n {
                lambda.len()
            } else {
                u.nrows()
            },
        });
    }
    let big_lambda = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(lambda[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let rho = u * big_lambda * u.adjoint();
    let rotated = u.adjoint() * dissipator_raw(&rho, rates) * u;
    Ok((0..n).map(|k| rotated[(k, k)].re).collect())
}

/// `‖eig(ρ + L(ρ)δt) − sort(λ + Mλ δt)‖∞` for `ρ = U diag(λ) U†`: the
/// remainder left by the first-order spectral update, `O(δt²)` for
/// nondegenerate `λ`.
pub fn first_order_error(lambda: &[f64], u: &CMatrix, rates: &RateMatrix, dt: f64) -> Result<f64> {
    let rhs = spectral_rhs_oracle(lambda, u, rates)?;
    let n = lambda.len();
    let diag = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(lambda[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let rho = u * diag * u.adjoint();
    let stepped = &rho + dissipator_raw(&rho, rates) * Complex64::new(dt, 0.0);
    let (exact, _) = eigh(&stepped)?;
    let mut linear: Vec<f64> = lambda.iter().zip(&rhs).map(|(l, r)| l + r * dt).collect();
    sort_descending(&mut linear);
    Ok(exact
        .iter()
        .zip(&linear)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSample {
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralTrajectory {
    pub samples: Vec<SpectralSample>,
    /// First time two eigenvalues crossed and were re-sorted (linear
    /// interpolation within the step); only set for order-maintaining
    /// policies.
    pub first_reorder: Option<f64>,
    pub max_sum_drift: f64,
    pub min_entry: f64,
}

impl SpectralTrajectory {
    pub fn last(&self) -> &SpectralSample {
        self.samples.last().expect("trajectory is never empty")
    }
}

fn check_simplex(values: &[f64], t: f64) -> Result<(f64, f64)> {
    let drift = (values.iter().sum::<f64>() - 1.0).abs();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if drift > SIMPLEX_TOL || !drift.is_finite() {
        return Err(CoreError::InvariantViolation {
            time: t,
            detail: format!("spectrum sums to 1 {drift:+e}"),
        });
    }
    if min < -SIMPLEX_TOL {
        return Err(CoreError::InvariantViolation {
            time: t,
            detail: format!("negative eigenvalue {min:e}"),
        });
    }
    Ok((drift, min))
}

fn rk4_linear(m: &DMatrix<f64>, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = m * x;
    let k2 = m * (x + &k1 * (0.5 * h));
    let k3 = m * (x + &k2 * (0.5 * h));
    let k4 = m * (x + &k3 * h);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Integrates the spectral equation with the control held fixed over each
/// step (zero-order hold on `policy`). Order-maintaining policies have the
/// state re-sorted descending after every step.
pub fn spectral_propagate(
    lambda0: &[f64],
    policy: &dyn Policy,
    gen: &SpectralGenerator,
    t_final: f64,
    dt: f64,
) -> Result<SpectralTrajectory> {
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
    gen.check_dim(lambda0.len())?;
    let ordered = policy.order_maintaining();

    let mut state = lambda0.to_vec();
    if ordered {
        sort_descending(&mut state);
    }
    let (mut max_drift, mut min_entry) = check_simplex(&state, 0.0)?;
    let mut samples = vec![SpectralSample {
        t: 0.0,
        values: state.clone(),
    }];
    let mut first_reorder = None;

    let full_steps = (t_final / dt * (1.0 + 1e-12)).floor() as usize;
    let mut t = 0.0;
    let mut k = 0usize;
    while t < t_final {
        let t_next = if k < full_steps {
            ((k + 1) as f64 * dt).min(t_final)
        } else {
            t_final
        };
        let h = t_next - t;
        if h <= 0.0 {
            break;
        }
        let theta = policy.control(&state, t)?;
        let m = gen.m_matrix(&theta)?;
        let x = DVector::from_column_slice(&state);
        let mut next: Vec<f64> = rk4_linear(&m, &x, h).as_slice().to_vec();
        if ordered {
            if first_reorder.is_none() {
                if let Some(j) = (0..next.len().saturating_sub(1)).find(|&j| next[j] < next[j + 1])
                {
                    let before = state[j] - state[j + 1];
                    let after = next[j] - next[j + 1];
                    let frac = if before - after > 0.0 {
                        before / (before - after)
                    } else {
                        0.0
                    };
                    first_reorder = Some(t + frac * h);
                }
            }
            sort_descending(&mut next);
        }
        let (drift, min) = check_simplex(&next, t_next)?;
        max_drift = max_drift.max(drift);
        min_entry = min_entry.min(min);
        state = next;
        t = t_next;
        k += 1;
        samples.push(SpectralSample {
            t,
            values: state.clone(),
        });
    }

    Ok(SpectralTrajectory {
        samples,
        first_reorder,
        max_sum_drift: max_drift,
        min_entry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{self, birkhoff_sample};

    fn lambda_gen() -> SpectralGenerator {
        build_generator(&RateMatrix::lambda(2.0, 1.0).unwrap())
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn lambda_generator_blocks() {
        let gen = lambda_gen();
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.0, 0.0, -3.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(gen.a(), &a);
        assert_eq!(gen.b(), &b);
        assert_eq!(
            gen.d(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -3.0, 0.0]))
        );
        assert_eq!(&(gen.b() + gen.d()), gen.a());
    }

    #[test]
    fn zero_and_two_level_generators() {
        let gen = build_generator(&RateMatrix::zeros(3));
        assert_eq!(gen.a().amax(), 0.0);
        assert_eq!(gen.b().amax(), 0.0);
        let gamma = 0.7;
        let gen =
            build_generator(&RateMatrix::from_rows(&[vec![0.0, gamma], vec![0.0, 0.0]]).unwrap());
        assert_eq!(
            gen.a(),
            &DMatrix::from_row_slice(2, 2, &[0.0, gamma, 0.0, -gamma])
        );
    }

    #[test]
    fn generator_columns_sum_to_zero() {
        let mut r = sampling::rng(8);
        for _ in 0..20 {
            let g = DMatrix::from_fn(4, 4, |i, j| {
                if i == j {
                    0.0
                } else {
                    rand::Rng::random::<f64>(&mut r)
                }
            });
            let gen = build_generator(&RateMatrix::new(g).unwrap());
            for j in 0..4 {
                assert!(gen.a().column(j).sum().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn theta_from_reference_unitaries() {
        assert!(theta_from_unitary(&CMatrix::identity(3, 3))
            .unwrap()
            .is_identity());
        let perm = [2usize, 0, 1];
        let p = permutation_matrix(&perm).map(|x| Complex64::new(x, 0.0));
        assert_eq!(
            theta_from_unitary(&p).unwrap(),
            DoublyStochastic::permutation(&perm)
        );
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut rot = CMatrix::identity(3, 3);
        rot[(1, 1)] = Complex64::new(s, 0.0);
        rot[(1, 2)] = Complex64::new(-s, 0.0);
        rot[(2, 1)] = Complex64::new(s, 0.0);
        rot[(2, 2)] = Complex64::new(s, 0.0);
        let theta = theta_from_unitary(&rot).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.5, 0.5]);
        assert!((theta.matrix() - want).amax() < 1e-15);
        let bad = CMatrix::identity(3, 3) * Complex64::new(0.9, 0.0);
        assert!(matches!(
            theta_from_unitary(&bad),
            Err(CoreError::NotUnitary { .. })
        ));
    }

    #[test]
    fn doubly_stochastic_validation() {
        assert!(DoublyStochastic::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).is_ok());
        assert!(DoublyStochastic::from_rows(&[vec![0.6, 0.5], vec![0.4, 0.5]]).is_err());
        assert!(DoublyStochastic::from_rows(&[vec![1.5, -0.5], vec![-0.5, 1.5]]).is_err());
    }

    #[test]
    fn compose_d_cases() {
        let gen = lambda_gen();
        let d = gen.d();
        assert_eq!(
            theta_compose_d(&DoublyStochastic::identity(3), &d).unwrap(),
            d
        );
        let perm = [1usize, 2, 0];
        let p = DoublyStochastic::permutation(&perm);
        let want = p.matrix().transpose() * &d * p.matrix();
        assert_eq!(theta_compose_d(&p, &d).unwrap(), want);
        let uniform = DoublyStochastic::new(DMatrix::from_element(3, 3, 1.0 / 3.0)).unwrap();
        let got = theta_compose_d(&uniform, &d).unwrap();
        assert!((got - DMatrix::from_diagonal_element(3, 3, -1.0)).amax() < 1e-15);
        assert!(theta_compose_d(&uniform, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn rhs_identity_reduces_to_a() {
        let gen = lambda_gen();
        let v = spectral_rhs(&[0.5, 0.3, 0.2], &DoublyStochastic::identity(3), &gen).unwrap();
        assert_close(&v, &[0.6, -0.9, 0.3], 1e-15);
        assert!(matches!(
            spectral_rhs(&[0.5, 0.5], &DoublyStochastic::identity(3), &gen),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rhs_is_nonnegative_on_empty_levels() {
        let gen = lambda_gen();
        let mut r = sampling::rng(5);
        for _ in 0..200 {
            let theta = DoublyStochastic::new(birkhoff_sample(&mut r, 3, 4)).unwrap();
            let mut lam = sampling::random_simplex(&mut r, 2);
            lam.insert(1, 0.0);
            let v = spectral_rhs(&lam, &theta, &gen).unwrap();
            assert!(v[1] >= -1e-15, "{v:?}");
            assert!(v.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_reference_cases() {
        let rates = RateMatrix::lambda(2.0, 1.0).unwrap();
        let v = spectral_rhs_oracle(&[0.0, 1.0, 0.0], &CMatrix::identity(3, 3), &rates).unwrap();
        assert_close(&v, &[2.0, -3.0, 1.0], 1e-15);

        let perm = [0usize, 2, 1];
        let p = permutation_matrix(&perm);
        let pu = p.map(|x| Complex64::new(x, 0.0));
        let lam = [0.5, 0.3, 0.2];
        let got = spectral_rhs_oracle(&lam, &pu, &rates).unwrap();
        let gen = build_generator(&rates);
        let want = p.transpose() * gen.a() * &p * DVector::from_column_slice(&lam);
        assert_close(&got, want.as_slice(), 1e-15);
    }

    #[test]
    fn canonical_form_matches_oracle() {
        let mut r = sampling::rng(77);
        for n in [3usize, 4] {
            for _ in 0..200 {
                let g = DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        rand::Rng::random::<f64>(&mut r)
                    }
                });
                let rates = RateMatrix::new(g).unwrap();
                let gen = build_generator(&rates);
                let u = sampling::haar_unitary_from(&mut r, n);
                let lam = sampling::random_spectrum(&mut r, n);
                let theta = theta_from_unitary(&u).unwrap();
                let fast = spectral_rhs(&lam, &theta, &gen).unwrap();
                let slow = spectral_rhs_oracle(&lam, &u, &rates).unwrap();
                assert_close(&fast, &slow, 1e-10);
            }
        }
    }

    #[test]
    fn identity_policy_matches_closed_form() {
        let gen = lambda_gen();
        let traj =
            spectral_propagate(&[0.0, 1.0, 0.0], &IdentityPolicy, &gen, 1.0, 1e-3 / 2.0).unwrap();
        let e = (-3.0f64).exp();
        let want = [2.0 / 3.0 * (1.0 - e), e, 1.0 / 3.0 * (1.0 - e)];
        assert_close(&traj.last().values, &want, 1e-6);
        assert_eq!(traj.last().t, 1.0);
        assert!(traj.first_reorder.is_none());
    }

    #[test]
    fn ground_state_is_constant_under_identity() {
        let gen = lambda_gen();
        let traj = spectral_propagate(&[1.0, 0.0, 0.0], &IdentityPolicy, &gen, 0.3, 1e-3).unwrap();
        assert!(traj.samples.iter().all(|s| s.values == vec![1.0, 0.0, 0.0]));
    }

    #[test]
    fn greedy_keeps_degenerate_pair_together() {
        let gen = lambda_gen();
        let traj = spectral_propagate(&[0.5, 0.25, 0.25], &GreedyPolicy, &gen, 1e-3, 1e-3).unwrap();
        let v = &traj.last().values;
        assert!(v[0] >= v[1] && v[1] >= v[2]);
        assert!((v[1] - v[2]).abs() < 1e-2);
    }

    #[test]
    fn propagate_rejects_bad_arguments() {
        let gen = lambda_gen();
        assert!(spectral_propagate(&[1.0, 0.0, 0.0], &IdentityPolicy, &gen, 1.0, 0.0).is_err());
        assert!(spectral_propagate(&[1.0, 0.0], &IdentityPolicy, &gen, 1.0, 0.1).is_err());
        assert!(matches!(
            spectral_propagate(&[0.9, 0.0, 0.0], &IdentityPolicy, &gen, 1.0, 0.1),
            Err(CoreError::InvariantViolation { .. })
        ));
    }

    #[test]
    fn first_order_remainder_is_quadratic() {
        let rates = RateMatrix::lambda(1.0, 0.5).unwrap();
        let mut r = sampling::rng(21);
        let u = sampling::haar_unitary_from(&mut r, 3);
        let lam = [0.55, 0.3, 0.15];
        let e1 = first_order_error(&lam, &u, &rates, 1e-3).unwrap();
        let e2 = first_order_error(&lam, &u, &rates, 5e-4).unwrap();
        assert!((e1 / e2 - 4.0).abs() < 0.2, "{}", e1 / e2);
        let zero = RateMatrix::zeros(3);
        assert!(first_order_error(&lam, &u, &zero, 1e-3).unwrap() < 1e-15);
    }
}
