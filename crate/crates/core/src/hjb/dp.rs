// SPDX-License-Identifier: Apache-2.0

//! Backward dynamic programming for the three-level Λ system on an ordered
//! simplex grid.

use rayon::prelude::*;
use serde::Serialize;

use super::{ActionSet, TIE_TOL};
use crate::density::Spectrum;
use crate::error::{CoreError, Result};
use crate::lambda3::{return_function, LambdaSystem};
use crate::spectral::DoublyStochastic;

/// Propagated points may leave the simplex by this much before the step is
/// rejected; smaller excursions are clipped.
const UNDERFLOW_TOL: f64 = 1e-9;

/// Value function and extracted policy on the grid
/// `{(i, j, k)/m : i ≥ j ≥ k, i + j + k = m}` at times `t_n = n·T/n_t`.
#[derive(Debug, Clone)]
pub struct ValueTable {
    m: usize,
    t_final: f64,
    n_t: usize,
    points: Vec<[usize; 3]>,
    /// Full-lattice `(i, j)` to ordered point index of `sort(i, j, m−i−j)`.
    lookup: Vec<usize>,
    values: Vec<f64>,
    policy: Vec<u16>,
    labels: Vec<String>,
    is_permutation: Vec<bool>,
    identity: usize,
}

impl ValueTable {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_t as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn points(&self) -> &[[usize; 3]] {
        &self.points
    }

    pub fn point_spectrum(&self, p: usize) -> [f64; 3] {
        let m = self.m as f64;
        let [i, j, k] = self.points[p];
        [i as f64 / m, j as f64 / m, k as f64 / m]
    }

    /// All three eigenvalues distinct and nonzero.
    pub fn is_interior(&self, p: usize) -> bool {
        let [i, j, k] = self.points[p];
        i > j && j > k && k > 0
    }

    pub fn value(&self, n: usize, p: usize) -> f64 {
        self.values[n * self.points.len() + p]
    }

    /// Index of the chosen action at time slice `n < n_t`.
    pub fn policy(&self, n: usize, p: usize) -> usize {
        self.policy[n * self.points.len() + p] as usize
    }

    pub fn action_label(&self, a: usize) -> &str {
        &self.labels[a]
    }

    pub fn action_is_permutation(&self, a: usize) -> bool {
        self.is_permutation[a]
    }

    pub fn identity_action(&self) -> usize {
        self.identity
    }

    /// Curvature-corrected interpolant of slice `n` at a sorted point of the
    /// simplex.
    pub fn interpolate(&self, n: usize, lambda: &[f64; 3]) -> f64 {
        let slice = &self.values[n * self.points.len()..(n + 1) * self.points.len()];
        let hess = hessians(slice, &self.points, &self.lookup, self.m);
        interpolate(slice, &hess, &self.lookup, self.m, lambda)
    }

    /// Largest `V(λ, τ) − V(λ, τ + δt)` over the grid; nonpositive when the
    /// value is nondecreasing in the time-to-go.
    pub fn tau_monotonicity_violation(&self) -> f64 {
        let np = self.points.len();
        let mut worst = f64::NEG_INFINITY;
        for n in 0..self.n_t {
            for p in 0..np {
                worst = worst.max(self.value(n + 1, p) - self.value(n, p));
            }
        }
        worst
    }

    /// Largest decrease of `V` along an elementary transfer from a smaller to
    /// a larger eigenvalue, over every grid point and slice.
    pub fn schur_violation(&self) -> f64 {
        let m = self.m;
        let np = self.points.len();
        let idx = |i: usize, j: usize| self.lookup[i * (m + 1) + j];
        let mut worst = f64::NEG_INFINITY;
        for n in 0..=self.n_t {
            let v = &self.values[n * np..(n + 1) * np];
            for &[i, j, k] in &self.points {
                let here = v[idx(i, j)];
                let mut moves = Vec::with_capacity(3);
                if j > 0 {
                    moves.push((i + 1, j - 1));
                }
                if k > 0 {
                    moves.push((i + 1, j));
                    if j < i {
                        moves.push((i, j + 1));
                    }
                }
                for (a, b) in moves {
                    worst = worst.max(here - v[idx(a, b)]);
                }
            }
        }
        worst
    }
}

/// Second differences of a slice in lattice units `(j, k) = m·(λ₂, λ₃)`,
/// as `[H_jj, H_kk, H_jk]` per grid point. Central where both neighbours lie
/// in the chamber, one-sided otherwise; the mixed term comes from the second
/// difference along `(1, 1)` or `(1, −1)`.
fn hessians(slice: &[f64], points: &[[usize; 3]], lookup: &[usize], m: usize) -> Vec<[f64; 3]> {
    let inside = |j: isize, k: isize| k >= 0 && k <= j && 2 * j + k <= m as isize;
    let at =
        |j: isize, k: isize| slice[lookup[(m as isize - j - k) as usize * (m + 1) + j as usize]];
    let second = |j: isize, k: isize, dj: isize, dk: isize| -> Option<f64> {
        let p = |c: isize| (j + c * dj, k + c * dk);
        let ok = |c: isize| {
            let (a, b) = p(c);
            inside(a, b)
        };
        let v = |c: isize| {
            let (a, b) = p(c);
            at(a, b)
        };
        [(-1, 0, 1), (0, 1, 2), (-2, -1, 0)]
            .into_iter()
            .find(|&(a, _, c)| ok(a) && ok(c))
            .map(|(a, b, c)| v(a) - 2.0 * v(b) + v(c))
    };
    let raw: Vec<[Option<f64>; 3]> = points
        .par_iter()
        .map(|&[_, j, k]| {
            let (j, k) = (j as isize, k as isize);
            let hjj = second(j, k, 1, 0);
            let hkk = second(j, k, 0, 1);
            let hjk = match (hjj, hkk) {
                (Some(a), Some(b)) => second(j, k, 1, 1)
                    .map(|d| 0.5 * (d - a - b))
                    .or_else(|| second(j, k, 1, -1).map(|d| 0.5 * (a + b - d))),
                _ => None,
            };
            [hjj, hkk, hjk]
        })
        .collect();
    // Corners lack some stencils; borrow those entries from the nearest node
    // that has them.
    let mut near: Vec<(isize, isize)> = (-2..=2)
        .flat_map(|a| (-2..=2).map(move |b| (a, b)))
        .filter(|&d| d != (0, 0))
        .collect();
    near.sort_by_key(|&(a, b)| (a * a + b * b, a, b));
    points
        .iter()
        .enumerate()
        .map(|(p, &[_, j, k])| {
            let mut h = [0.0; 3];
            for (c, out) in h.iter_mut().enumerate() {
                *out = raw[p][c]
                    .or_else(|| {
                        near.iter().find_map(|&(dj, dk)| {
                            let (a, b) = (j as isize + dj, k as isize + dk);
                            if inside(a, b) {
                                raw[lookup[(m as isize - a - b) as usize * (m + 1) + a as usize]][c]
                            } else {
                                None
                            }
                        })
                    })
                    .unwrap_or(0.0);
            }
            h
        })
        .collect()
}

/// Interpolation on a triangulation of the ordered chamber in
/// `(j, k) = m·(λ₂, λ₃)`: unit cells split along `j = k`, with the strip
/// next to `λ₁ = λ₂` filled by two triangles per column so that every
/// chamber face is a triangulation edge. The linear interpolant is corrected
/// by `−½ Σ wᵢ dᵢᵀ H dᵢ` (with `dᵢ` the offset to vertex `i` and `H` the
/// barycentric blend of the vertex Hessians), which makes it exact for
/// quadratics. Queries whose triangle would use a point outside the chamber
/// (corners that are not lattice points) fall back to
/// [`interpolate_lattice`].
fn interpolate(slice: &[f64], hess: &[[f64; 3]], lookup: &[usize], m: usize, x: &[f64; 3]) -> f64 {
    interpolate_pair(slice, hess, lookup, m, x).1
}

/// The plain linear value and its curvature-corrected counterpart.
fn interpolate_pair(
    slice: &[f64],
    hess: &[[f64; 3]],
    lookup: &[usize],
    m: usize,
    x: &[f64; 3],
) -> (f64, f64) {
    let mf = m as f64;
    let idx = |j: usize, k: usize| lookup[(m - j - k) * (m + 1) + j];
    let inside = |j: usize, k: usize| k <= j && 2 * j + k <= m;
    let jj = (mf * x[1]).max(0.0);
    let kk = (mf * x[2]).max(0.0);
    let j0 = jj.floor() as usize;
    let k0 = kk.floor() as usize;

    let tri = if 2 * j0 + k0 + 3 <= m {
        let (s, t) = (jj - j0 as f64, kk - k0 as f64);
        if t <= s {
            [(j0, k0, 1.0 - s), (j0 + 1, k0, s - t), (j0 + 1, k0 + 1, t)]
        } else {
            [(j0, k0, 1.0 - t), (j0, k0 + 1, t - s), (j0 + 1, k0 + 1, s)]
        }
    } else if 2 * j0 + 2 <= m {
        // A = (j0, kb), B = (j0+1, kb), D = (j0, kb+1), C = (j0, kb+2)
        let kb = m - 2 * j0 - 2;
        let (s, t) = (jj - j0 as f64, kk - kb as f64);
        if s + t <= 1.0 {
            [(j0, kb, 1.0 - s - t), (j0 + 1, kb, s), (j0, kb + 1, t)]
        } else {
            [
                (j0, kb + 1, 2.0 - 2.0 * s - t),
                (j0 + 1, kb, s),
                (j0, kb + 2, s + t - 1.0),
            ]
        }
    } else {
        let v = interpolate_lattice(slice, lookup, m, x);
        return (v, v);
    };
    if !tri.iter().all(|&(j, k, _)| inside(j, k)) {
        let v = interpolate_lattice(slice, lookup, m, x);
        return (v, v);
    }
    let mut h = [0.0; 3];
    let mut linear = 0.0;
    for &(j, k, w) in &tri {
        let p = idx(j, k);
        linear += w * slice[p];
        for (a, b) in h.iter_mut().zip(hess[p]) {
            *a += w * b;
        }
    }
    let curvature: f64 = tri
        .iter()
        .map(|&(j, k, w)| {
            let (dj, dk) = (j as f64 - jj, k as f64 - kk);
            w * (h[0] * dj * dj + h[1] * dk * dk + 2.0 * h[2] * dj * dk)
        })
        .sum();
    (linear, linear - 0.5 * curvature)
}

/// Linear interpolation on the standard triangulation of the full simplex
/// lattice, reading values through the symmetric extension.
fn interpolate_lattice(slice: &[f64], lookup: &[usize], m: usize, x: &[f64; 3]) -> f64 {
    let mf = m as f64;
    let at = |i: usize, j: usize| slice[lookup[i * (m + 1) + j]];
    let u = (mf * x[0]).clamp(0.0, mf);
    let v = (mf * x[1]).clamp(0.0, mf - u);
    let fi = (u.floor() as usize).min(m);
    let fj = (v.floor() as usize).min(m - fi);
    if fi + fj == m {
        return at(fi, fj);
    }
    let fu = u - fi as f64;
    let fv = v - fj as f64;
    if fu + fv <= 1.0 || fi + fj + 2 > m {
        (1.0 - fu - fv) * at(fi, fj) + fu * at(fi + 1, fj) + fv * at(fi, fj + 1)
    } else {
        (fu + fv - 1.0) * at(fi + 1, fj + 1)
            + (1.0 - fv) * at(fi + 1, fj)
            + (1.0 - fu) * at(fi, fj + 1)
    }
}

fn sort3(x: &mut [f64; 3]) {
    x.sort_by(|a, b| b.total_cmp(a));
}

/// Solves `V(λ, t) = max_a V(sort(λ + M_a λ δt), t + δt)` backwards from
/// `V(λ, T) = λ₁`, interpolating on the grid.
///
/// Ties within `1e-9` of the maximum go to the identity. Fails with
/// [`CoreError::GridUnderflow`] when a step pushes an eigenvalue below
/// `−1e-9`.
pub fn dp_solve(
    sys: &LambdaSystem,
    t_final: f64,
    n_t: usize,
    m: usize,
    actions: &ActionSet,
) -> Result<ValueTable> {
    if m < 10 || n_t < 100 {
        return Err(CoreError::InvalidArgument(format!(
            "grid too coarse: m = {m} (need ≥ 10), n_t = {n_t} (need ≥ 100)"
        )));
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "horizon {t_final} must be positive"
        )));
    }
    let gen = sys.generator();
    let mut thetas: Vec<(String, DoublyStochastic)> = actions
        .iter()
        .map(|(_, c)| (c.label.clone(), c.theta.clone()))
        .collect();
    let identity = match thetas.iter().position(|(_, t)| t.is_identity()) {
        Some(k) => k,
        None => {
            thetas.insert(0, ("identity".into(), DoublyStochastic::identity(3)));
            0
        }
    };
    if thetas.len() > u16::MAX as usize {
        return Err(CoreError::InvalidArgument("too many actions".into()));
    }
    let dt = t_final / n_t as f64;
    let steps = thetas
        .iter()
        .map(|(_, th)| {
            let mm = gen.m_matrix(th)?;
            let mut s = [[0.0; 3]; 3];
            for (i, row) in s.iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = mm[(i, j)] * dt;
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    for i in 0..=m {
        for j in 0..=i.min(m - i) {
            let k = m - i - j;
            if k <= j {
                points.push([i, j, k]);
            }
        }
    }
    let mut lookup = vec![usize::MAX; (m + 1) * (m + 1)];
    for i in 0..=m {
        for j in 0..=(m - i) {
            let mut t = [i, j, m - i - j];
            t.sort_unstable_by(|a, b| b.cmp(a));
            lookup[i * (m + 1) + j] = points
                .binary_search_by(|p| p.cmp(&t))
                .expect("sorted lattice point is on the grid");
        }
    }

    let np = points.len();
    let mf = m as f64;
    let mut values = vec![0.0; (n_t + 1) * np];
    let mut policy = vec![0u16; n_t * np];
    for (p, pt) in points.iter().enumerate() {
        values[n_t * np + p] = pt[0] as f64 / mf;
    }

    for n in (0..n_t).rev() {
        let (head, tail) = values.split_at_mut((n + 1) * np);
        let next = &tail[..np];
        let hess = hessians(next, &points, &lookup, m);
        let t = n as f64 * dt;
        let solved = points
            .par_iter()
            .map(|pt| {
                let lam = [pt[0] as f64 / mf, pt[1] as f64 / mf, pt[2] as f64 / mf];
                // actions are ranked on the monotone linear interpolant;
                // the winner is valued with the corrected one
                let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                let mut best_a = identity;
                let mut v_identity = best;
                for (a, s) in steps.iter().enumerate() {
                    let mut x = [0.0; 3];
                    for i in 0..3 {
                        x[i] = lam[i] + s[i][0] * lam[0] + s[i][1] * lam[1] + s[i][2] * lam[2];
                    }
                    let low = x.iter().cloned().fold(f64::INFINITY, f64::min);
                    if low < -UNDERFLOW_TOL {
                        return Err(CoreError::GridUnderflow {
                            time: t,
                            excess: -low,
                        });
                    }
                    if low < 0.0 {
                        x.iter_mut().for_each(|v| *v = v.max(0.0));
                        let total: f64 = x.iter().sum();
                        x.iter_mut().for_each(|v| *v /= total);
                    }
                    sort3(&mut x);
                    let val = interpolate_pair(next, &hess, &lookup, m, &x);
                    if a == identity {
                        v_identity = val;
                    }
                    if val.0 > best.0 {
                        best = val;
                        best_a = a;
                    }
                }
                if v_identity.0 >= best.0 - TIE_TOL {
                    best_a = identity;
                    best = v_identity;
                }
                Ok((best.1, best_a as u16))
            })
            .collect::<Result<Vec<_>>>()?;
        let slice = &mut head[n * np..];
        for (p, (v, a)) in solved.into_iter().enumerate() {
            slice[p] = v;
            policy[n * np + p] = a;
        }
    }

    Ok(ValueTable {
        m,
        t_final,
        n_t,
        points,
        lookup,
        values,
        policy,
        is_permutation: thetas.iter().map(|(_, t)| t.is_permutation()).collect(),
        labels: thetas.into_iter().map(|(l, _)| l).collect(),
        identity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpComparison {
    pub m: usize,
    pub n_t: usize,
    pub interior_points: usize,
    /// `max |V_dp − V|` at `t = 0` over interior points.
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub worst_point: [f64; 3],
    /// Fraction of interior `(point, slice)` pairs whose chosen action is a
    /// permutation.
    pub order_maintaining_fraction: f64,
    pub identity_fraction: f64,
}

/// Compares the grid solution at `t = 0` with the closed-form return
/// function and summarises the extracted policy.
pub fn compare_with_analytic(table: &ValueTable, sys: &LambdaSystem) -> Result<DpComparison> {
    let interior: Vec<usize> = (0..table.points.len())
        .filter(|&p| table.is_interior(p))
        .collect();
    let mut max_dev = 0.0_f64;
    let mut sum_dev = 0.0;
    let mut worst = [0.0; 3];
    for &p in &interior {
        let lam = table.point_spectrum(p);
        let exact = return_function(&Spectrum::new(lam.to_vec())?, table.t_final, sys);
        let dev = (table.value(0, p) - exact).abs();
        sum_dev += dev;
        if dev > max_dev {
            max_dev = dev;
            worst = lam;
        }
    }
    let mut perm = 0usize;
    let mut ident = 0usize;
    for n in 0..table.n_t {
        for &p in &interior {
            let a = table.policy(n, p);
            perm += table.is_permutation[a] as usize;
            ident += (a == table.identity) as usize;
        }
    }
    let total = (table.n_t * interior.len()).max(1) as f64;
    Ok(DpComparison {
        m: table.m,
        n_t: table.n_t,
        interior_points: interior.len(),
        max_deviation: max_dev,
        mean_deviation: sum_dev / interior.len().max(1) as f64,
        worst_point: worst,
        order_maintaining_fraction: perm as f64 / total,
        identity_fraction: ident as f64 / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::SamplerConfig;

    fn solve(m: usize, n_t: usize) -> ValueTable {
        let sys = LambdaSystem::new(2.0, 1.0).unwrap();
        let actions = SamplerConfig {
            n_haar: 8,
            ..SamplerConfig::dp_default(3)
        }
        .build(3)
        .unwrap();
        dp_solve(&sys, 1.0, n_t, m, &actions).unwrap()
    }

    #[test]
    fn grid_size_and_ordering() {
        let t = solve(12, 100);
        // partitions of 12 into at most 3 parts
        assert_eq!(t.points().len(), 19);
        assert!(t.points().iter().all(|p| p[0] >= p[1] && p[1] >= p[2]));
        assert!((0..t.points().len())
            .all(|p| (t.value(t.n_t(), p) - t.point_spectrum(p)[0]).abs() < 1e-15));
    }

    fn slice_of(t: &ValueTable, f: impl Fn(&[f64; 3]) -> f64) -> Vec<f64> {
        (0..t.points().len())
            .map(|p| f(&t.point_spectrum(p)))
            .collect()
    }

    fn interp(t: &ValueTable, slice: &[f64], x: &[f64; 3]) -> f64 {
        let hess = hessians(slice, &t.points, &t.lookup, t.m());
        interpolate(slice, &hess, &t.lookup, t.m(), x)
    }

    fn queries() -> Vec<[f64; 3]> {
        let mut r = crate::sampling::rng(2);
        let mut pts = vec![
            [0.34, 0.33, 0.33],
            [0.47, 0.46, 0.07],
            [0.5, 0.5, 0.0],
            [1.0, 0.0, 0.0],
        ];
        pts.extend((0..500).map(|_| {
            let v = crate::sampling::random_spectrum(&mut r, 3);
            [v[0], v[1], v[2]]
        }));
        pts
    }

    #[test]
    fn chamber_interpolation_is_exact_for_linear_functions() {
        let t = solve(12, 100);
        let f = |x: &[f64; 3]| 2.0 * x[0] - x[1] + 0.5;
        let slice = slice_of(&t, f);
        for x in queries() {
            assert!((interp(&t, &slice, &x) - f(&x)).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn chamber_interpolation_is_exact_for_quadratics() {
        let t = solve(12, 100);
        let f =
            |x: &[f64; 3]| 3.0 * x[1] * x[1] - x[1] * x[2] + 2.0 * x[2] * x[2] + x[0] - 0.7 * x[2];
        let slice = slice_of(&t, f);
        for x in queries() {
            assert!((interp(&t, &slice, &x) - f(&x)).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn interpolants_agree_on_sorted_cells() {
        let t = solve(10, 100);
        let slice = slice_of(&t, |x| 2.0 * x[0] - x[1] + 0.5);
        for x in [[0.55, 0.3, 0.15], [0.62, 0.21, 0.17], [0.81, 0.1, 0.09]] {
            let a = interp(&t, &slice, &x);
            let b = interpolate_lattice(&slice, &t.lookup, t.m(), &x);
            assert!((a - b).abs() < 1e-12, "{x:?}");
        }
        // m = 10 leaves the equal-thirds corner off the lattice
        let x = [0.34, 0.33, 0.33];
        assert!(interp(&t, &slice, &x).is_finite());
    }

    #[test]
    fn value_is_monotone_and_schur_convex() {
        let t = solve(20, 200);
        assert!(t.tau_monotonicity_violation() <= 1e-12);
        assert!(t.schur_violation() <= 1e-12);
    }

    #[test]
    fn coarse_grid_tracks_the_closed_form() {
        let sys = LambdaSystem::new(2.0, 1.0).unwrap();
        let t = solve(20, 200);
        let cmp = compare_with_analytic(&t, &sys).unwrap();
        assert!(cmp.max_deviation < 2e-2, "{cmp:?}");
        assert!(cmp.order_maintaining_fraction > 0.95, "{cmp:?}");
    }

    #[test]
    fn rejects_coarse_grids() {
        let sys = LambdaSystem::new(2.0, 1.0).unwrap();
        let actions = SamplerConfig::dp_default(0).build(3).unwrap();
        assert!(matches!(
            dp_solve(&sys, 1.0, 100, 5, &actions),
            Err(CoreError::InvalidArgument(_))
        ));
        assert!(matches!(
            dp_solve(&sys, 1.0, 10, 20, &actions),
            Err(CoreError::InvalidArgument(_))
        ));
    }

    #[test]
    fn large_steps_underflow() {
        let sys = LambdaSystem::new(2.0, 1.0).unwrap();
        let actions = SamplerConfig::dp_default(0).build(3).unwrap();
        // δt·g = 3.6 drives populations negative
        assert!(matches!(
            dp_solve(&sys, 120.0, 100, 10, &actions),
            Err(CoreError::GridUnderflow { .. })
        ));
    }
}
