// SPDX-License-Identifier: Apache-2.0

//! Candidate control families for maximising the HJB objective.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CoreError, Result};
use crate::registry::{param_u64, Registry};
use crate::sampling::{birkhoff_sample, haar_unitary_from, permutations};
use crate::spectral::{theta_from_unitary, DoublyStochastic};

use super::embedded_theta;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub label: String,
    pub theta: DoublyStochastic,
}

/// Produces a deterministic list of control matrices of dimension `n`.
pub trait ThetaSampler: Send + Sync {
    fn family(&self) -> &str;
    fn candidates(&self, n: usize) -> Result<Vec<Candidate>>;
}

/// All `n!` permutation matrices, identity first.
pub struct PermutationVertices;

impl ThetaSampler for PermutationVertices {
    fn family(&self) -> &str {
        "permutations"
    }

    fn candidates(&self, n: usize) -> Result<Vec<Candidate>> {
        Ok(permutations(n)
            .into_iter()
            .map(|p| Candidate {
                label: format!(
                    "perm{}",
                    p.iter()
                        .map(|i| i.to_string())
                        .collect::<Vec<_>>()
                        .join("-")
                ),
                theta: DoublyStochastic::permutation(&p),
            })
            .collect())
    }
}

/// `|U|²` for seeded Haar-random unitaries (unistochastic matrices).
pub struct HaarUnistochastic {
    pub count: usize,
    pub seed: u64,
}

impl ThetaSampler for HaarUnistochastic {
    fn family(&self) -> &str {
        "haar"
    }

    fn candidates(&self, n: usize) -> Result<Vec<Candidate>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|k| {
                let u = haar_unitary_from(&mut rng, n);
                Ok(Candidate {
                    label: format!("haar#{k}"),
                    theta: theta_from_unitary(&u)?,
                })
            })
            .collect()
    }
}

/// Random convex combinations of permutation matrices.
pub struct BirkhoffMixtures {
    pub count: usize,
    pub terms: usize,
    pub seed: u64,
}

impl ThetaSampler for BirkhoffMixtures {
    fn family(&self) -> &str {
        "birkhoff"
    }

    fn candidates(&self, n: usize) -> Result<Vec<Candidate>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|k| {
                Ok(Candidate {
                    label: format!("birkhoff#{k}"),
                    theta: DoublyStochastic::new(birkhoff_sample(&mut rng, n, self.terms))?,
                })
            })
            .collect()
    }
}

/// Regular grid over the three-level family with `Θ₁₃ = Θ₃₁ = 0`,
/// parametrised by `(Θ₂₁, Θ₂₃)` on the triangle `Θ₂₁ + Θ₂₃ ≤ 1`.
pub struct TriangleGrid {
    /// Grid points per side (spacing `1 / (points - 1)`).
    pub points: usize,
}

impl ThetaSampler for TriangleGrid {
    fn family(&self) -> &str {
        "triangle"
    }

    fn candidates(&self, n: usize) -> Result<Vec<Candidate>> {
        if n != 3 {
            return Err(CoreError::DimensionMismatch {
                expected: 3,
                found: n,
            });
        }
        if self.points < 2 {
            return Err(CoreError::InvalidArgument(
                "triangle grid needs at least 2 points per side".into(),
            ));
        }
        let steps = self.points - 1;
        let mut out = Vec::new();
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let a = i as f64 / steps as f64;
                let b = j as f64 / steps as f64;
                out.push(Candidate {
                    label: format!("triangle({a:.3};{b:.3})"),
                    theta: embedded_theta(a, b)?,
                });
            }
        }
        Ok(out)
    }
}

/// Built-in families: `permutations`, `haar {count, seed}`,
/// `birkhoff {count, terms, seed}`, `triangle {points}`.
pub fn sampler_registry() -> Registry<dyn ThetaSampler> {
    let mut reg: Registry<dyn ThetaSampler> = Registry::new("sampler");
    reg.register("permutations", |_| Ok(Box::new(PermutationVertices)));
    reg.register("haar", |p| {
        Ok(Box::new(HaarUnistochastic {
            count: param_u64(p, "count", 64)? as usize,
            seed: param_u64(p, "seed", 0)?,
        }))
    });
    reg.register("birkhoff", |p| {
        Ok(Box::new(BirkhoffMixtures {
            count: param_u64(p, "count", 64)? as usize,
            terms: param_u64(p, "terms", 4)? as usize,
            seed: param_u64(p, "seed", 0)?,
        }))
    });
    reg.register("triangle", |p| {
        Ok(Box::new(TriangleGrid {
            points: param_u64(p, "points", 11)? as usize,
        }))
    });
    reg
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub name: String,
    pub candidates: Vec<Candidate>,
}

/// Candidate controls grouped by the family that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    pub families: Vec<Family>,
}

impl ActionSet {
    pub fn from_samplers(samplers: &[Box<dyn ThetaSampler>], n: usize) -> Result<Self> {
        let families = samplers
            .iter()
            .map(|s| {
                Ok(Family {
                    name: s.family().to_owned(),
                    candidates: s.candidates(n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { families })
    }

    pub fn len(&self) -> usize {
        self.families.iter().map(|f| f.candidates.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(family, candidate)` pairs in a fixed order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Candidate)> {
        self.families
            .iter()
            .flat_map(|f| f.candidates.iter().map(move |c| (f.name.as_str(), c)))
    }
}

/// Sampler counts used to build an [`ActionSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_haar: usize,
    pub n_birkhoff: usize,
    pub birkhoff_terms: usize,
    /// Points per side of the restricted-triangle grid; 0 disables it.
    pub triangle_points: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_haar: 64,
            n_birkhoff: 64,
            birkhoff_terms: 4,
            triangle_points: 11,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// The action set for dynamic programming: permutations, Haar samples and
    /// the triangle grid.
    pub fn dp_default(seed: u64) -> Self {
        Self {
            n_birkhoff: 0,
            seed,
            ..Self::default()
        }
    }

    pub fn specs(&self, n: usize) -> Vec<(&'static str, Value)> {
        let mut specs = vec![("permutations", Value::Null)];
        if self.n_haar > 0 {
            specs.push(("haar", json!({"count": self.n_haar, "seed": self.seed})));
        }
        if self.n_birkhoff > 0 {
            specs.push((
                "birkhoff",
                json!({"count": self.n_birkhoff, "terms": self.birkhoff_terms,
                       "seed": self.seed.wrapping_add(1)}),
            ));
        }
        if n == 3 && self.triangle_points > 0 {
            specs.push(("triangle", json!({"points": self.triangle_points})));
        }
        specs
    }

    pub fn build(&self, n: usize) -> Result<ActionSet> {
        let reg = sampler_registry();
        let samplers = self
            .specs(n)
            .iter()
            .map(|(name, params)| reg.build(name, params))
            .collect::<Result<Vec<_>>>()?;
        ActionSet::from_samplers(&samplers, n)
    }
}
