// SPDX-License-Identifier: Apache-2.0

//! Seeded random sampling of unitaries, spectra and doubly stochastic matrices.
//!
//! Every sampler draws from a caller-supplied [`ChaCha8Rng`], so identical
//! seeds reproduce identical streams on every platform.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::density::{sort_descending, CMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-distributed unitary from the QR decomposition of a complex Ginibre
/// matrix, with the phases of `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary_from<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    assert!(n >= 1, "unitary dimension must be at least 1");
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Uniform (flat Dirichlet) point on the probability simplex.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Uniform simplex point sorted descending.
pub fn random_spectrum<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v = random_simplex(rng, n);
    sort_descending(&mut v);
    v
}

/// All permutations of `0..n` in lexicographic order; the identity is first.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    loop {
        out.push(current.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1))
            .rev()
            .find(|&i| current[i] < current[i + 1])
        else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}

/// Matrix `P` with `P[i][perm[i]] = 1`.
pub fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    DMatrix::from_fn(n, n, |i, j| if perm[i] == j { 1.0 } else { 0.0 })
}

pub fn random_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// Random point of the Birkhoff polytope: a Dirichlet-weighted convex
/// combination of `terms` uniformly drawn permutation matrices.
pub fn birkhoff_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, terms: usize) -> DMatrix<f64> {
    let weights = random_simplex(rng, terms.max(1));
    let mut m = DMatrix::zeros(n, n);
    for w in weights {
        let p = random_permutation(rng, n);
        m += permutation_matrix(&p) * w;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_lexicographic_and_complete() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[5], vec![2, 1, 0]);
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn birkhoff_samples_are_doubly_stochastic() {
        let mut r = rng(3);
        for _ in 0..50 {
            let m = birkhoff_sample(&mut r, 4, 5);
            for k in 0..4 {
                assert!((m.row(k).sum() - 1.0).abs() < 1e-12);
                assert!((m.column(k).sum() - 1.0).abs() < 1e-12);
            }
            assert!(m.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn simplex_samples_sum_to_one() {
        let mut r = rng(11);
        for n in 1..6 {
            let v = random_simplex(&mut r, n);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let s = random_spectrum(&mut r, n);
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
