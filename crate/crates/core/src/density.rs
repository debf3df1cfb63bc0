// SPDX-License-Identifier: Apache-2.0

//! Density matrices, spectra, purity measures and majorization.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::registry::Registry;

pub type CMatrix = DMatrix<Complex64>;

/// Numerical tolerances used when validating states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub psd: f64,
    pub eig: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            trace: 1e-10,
            psd: 1e-10,
            eig: 1e-9,
        }
    }
}

/// A validated N×N Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates with the default [`Tolerances`].
    pub fn new(m: CMatrix) -> Result<Self> {
        validate(m, &Tolerances::default())
    }

    pub fn from_diagonal(populations: &[f64]) -> Result<Self> {
        let n = populations.len();
        let m = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(populations[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(m)
    }

    pub(crate) fn from_unchecked(m: CMatrix) -> Self {
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    /// Diagonal entries (level populations).
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re).collect()
    }
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Checks the three density-matrix invariants in turn and reports the first
/// violation together with its magnitude.
pub fn validate(m: CMatrix, tol: &Tolerances) -> Result<DensityMatrix> {
    if m.nrows() != m.ncols() {
        return Err(CoreError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let herm = hermitian_deviation(&m);
    if herm > tol.herm {
        return Err(CoreError::NotHermitian { deviation: herm });
    }
    let trace = m.trace();
    let trace_dev = (trace - Complex64::new(1.0, 0.0)).norm();
    if trace_dev > tol.trace {
        return Err(CoreError::TraceDeviation {
            deviation: trace_dev,
        });
    }
    let (values, _) = eigh(&m)?;
    let min = values.last().copied().unwrap_or(0.0);
    if min < -tol.psd {
        return Err(CoreError::NegativeEigenvalue { value: min });
    }
    Ok(DensityMatrix { m })
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order (stable, so ties keep the solver's order). Columns of the
/// returned matrix are the matching eigenvectors.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    // Symmetrise first so the solver only ever sees an exactly Hermitian input.
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig =
        SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or(CoreError::EigensolverFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Eigenvalues of `rho`, descending, clipped into `[0, 1]` when within the
/// PSD tolerance of either end.
pub fn spectrum(rho: &DensityMatrix) -> Result<Spectrum> {
    spectrum_with(rho, &Tolerances::default())
}

pub fn spectrum_with(rho: &DensityMatrix, tol: &Tolerances) -> Result<Spectrum> {
    let (mut values, vectors) = eigh(rho.matrix())?;
    let n = values.len();
    let recon = {
        let diag = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        &vectors * diag * vectors.adjoint()
    };
    let err = (recon - rho.matrix()).camax();
    if err > tol.eig {
        return Err(CoreError::EigensolverFailure);
    }
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -tol.psd {
                return Err(CoreError::NegativeEigenvalue { value: *v });
            }
            *v = 0.0;
        } else if *v > 1.0 && *v <= 1.0 + tol.psd {
            *v = 1.0;
        }
    }
    Spectrum::new(values)
}

/// Eigenvalues in descending order, nonnegative, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let tol = Tolerances::default();
        if values.is_empty() {
            return Err(CoreError::InvalidSpectrum("empty".into()));
        }
        if let Some(k) = values.windows(2).position(|w| w[0] < w[1]) {
            return Err(CoreError::InvalidSpectrum(format!(
                "not descending at index {k}: {} < {}",
                values[k],
                values[k + 1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < -tol.psd) {
            return Err(CoreError::InvalidSpectrum(format!("entry {v} is negative")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > tol.trace {
            return Err(CoreError::InvalidSpectrum(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self(values))
    }

    /// Sorts descending (stable) before validating.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        sort_descending(&mut values);
        Self::new(values)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Spectrum {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Stable descending sort; equal entries keep their original order.
pub fn sort_descending(values: &mut [f64]) {
    values.sort_by(|a, b| b.total_cmp(a));
}

/// `|ρ|_∞`, the largest eigenvalue.
pub fn purity_largest(lambda: &Spectrum) -> f64 {
    lambda[0]
}

/// `Tr ρ² = Σ λᵢ²`.
pub fn purity_tr2(lambda: &Spectrum) -> f64 {
    lambda.values().iter().map(|v| v * v).sum()
}

/// Von Neumann entropy with unit Boltzmann constant and `0 ln 0 = 0`.
pub fn entropy_vn(lambda: &Spectrum) -> f64 {
    -lambda
        .values()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// A scalar measure of how close a spectrum is to a pure state.
pub trait PurityMeasure: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, lambda: &Spectrum) -> f64;
    /// `true` if larger values mean purer states (Schur-convex); `false` for
    /// disorder measures such as entropy (Schur-concave).
    fn increases_with_purity(&self) -> bool {
        true
    }
}

pub struct LargestEigenvalue;
pub struct TraceSquared;
pub struct VonNeumannEntropy;

impl PurityMeasure for LargestEigenvalue {
    fn name(&self) -> &str {
        "largest"
    }

    fn evaluate(&self, lambda: &Spectrum) -> f64 {
        purity_largest(lambda)
    }
}

impl PurityMeasure for TraceSquared {
    fn name(&self) -> &str {
        "tr2"
    }

    fn evaluate(&self, lambda: &Spectrum) -> f64 {
        purity_tr2(lambda)
    }
}

impl PurityMeasure for VonNeumannEntropy {
    fn name(&self) -> &str {
        "entropy"
    }

    fn evaluate(&self, lambda: &Spectrum) -> f64 {
        entropy_vn(lambda)
    }

    fn increases_with_purity(&self) -> bool {
        false
    }
}

pub fn purity_registry() -> Registry<dyn PurityMeasure> {
    let mut reg: Registry<dyn PurityMeasure> = Registry::new("purity measure");
    reg.register("largest", |_| Ok(Box::new(LargestEigenvalue)));
    reg.register("tr2", |_| Ok(Box::new(TraceSquared)));
    reg.register("entropy", |_| Ok(Box::new(VonNeumannEntropy)));
    reg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MajorizationOrder {
    /// `x ≺ y`
    LessThan,
    /// `y ≺ x`
    GreaterThan,
    Equal,
    Incomparable,
}

impl MajorizationOrder {
    pub fn reverse(self) -> Self {
        match self {
            Self::LessThan => Self::GreaterThan,
            Self::GreaterThan => Self::LessThan,
            other => other,
        }
    }
}

/// Prefix sums closer than this are treated as equal.
const MAJORIZATION_TOL: f64 = 1e-12;

/// Compares prefix sums of the descending-sorted vectors.
pub fn majorizes(x: &Spectrum, y: &Spectrum) -> Result<MajorizationOrder> {
    majorization_order(x.values(), y.values())
}

/// Like [`majorizes`] but accepts arbitrary ordering of the entries.
pub fn majorization_order(x: &[f64], y: &[f64]) -> Result<MajorizationOrder> {
    if x.len() != y.len() {
        return Err(CoreError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    sort_descending(&mut xs);
    sort_descending(&mut ys);
    let (mut px, mut py) = (0.0, 0.0);
    let mut below = true;
    let mut above = true;
    for (a, b) in xs.iter().zip(&ys) {
        px += a;
        py += b;
        match px.partial_cmp(&py) {
            _ if (px - py).abs() <= MAJORIZATION_TOL => {}
            Some(Ordering::Less) => above = false,
            _ => below = false,
        }
    }
    Ok(match (below, above) {
        (true, true) => MajorizationOrder::Equal,
        (true, false) => MajorizationOrder::LessThan,
        (false, true) => MajorizationOrder::GreaterThan,
        (false, false) => MajorizationOrder::Incomparable,
    })
}
