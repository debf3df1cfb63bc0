// SPDX-License-Identifier: Apache-2.0

use serde::Deserialize;
use serde_json::Value;

use super::DoublyStochastic;
use crate::error::{CoreError, Result};
use crate::registry::Registry;

/// A feedback control law `Θ(λ, t)` for the spectral equation.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    fn control(&self, populations: &[f64], t: f64) -> Result<DoublyStochastic>;

    /// When set, the integrator keeps the state sorted descending after each
    /// step, which realises continuous permutation control in the `dt → 0`
    /// limit.
    fn order_maintaining(&self) -> bool {
        false
    }
}

/// `Θ = I` without re-sorting: the bare dissipative dynamics.
pub struct IdentityPolicy;

impl Policy for IdentityPolicy {
    fn name(&self) -> &str {
        "identity"
    }

    fn control(&self, populations: &[f64], _t: f64) -> Result<DoublyStochastic> {
        Ok(DoublyStochastic::identity(populations.len()))
    }
}

/// Keep ρ diagonal and its eigenvalues ordered: `Θ = I` with re-sorting.
pub struct GreedyPolicy;

impl Policy for GreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn control(&self, populations: &[f64], _t: f64) -> Result<DoublyStochastic> {
        Ok(DoublyStochastic::identity(populations.len()))
    }

    fn order_maintaining(&self) -> bool {
        true
    }
}

/// A constant control matrix.
pub struct FixedPolicy {
    theta: DoublyStochastic,
}

impl FixedPolicy {
    pub fn new(theta: DoublyStochastic) -> Self {
        Self { theta }
    }
}

impl Policy for FixedPolicy {
    fn name(&self) -> &str {
        "fixed"
    }

    fn control(&self, _populations: &[f64], _t: f64) -> Result<DoublyStochastic> {
        Ok(self.theta.clone())
    }
}

/// Piecewise-constant open-loop control: segment `k` is active from its start
/// time until the next segment starts. Before the first start the first
/// segment applies.
pub struct SchedulePolicy {
    segments: Vec<(f64, DoublyStochastic)>,
}

impl SchedulePolicy {
    pub fn new(segments: Vec<(f64, DoublyStochastic)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(CoreError::InvalidArgument(
                "schedule has no segments".into(),
            ));
        }
        if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(CoreError::InvalidArgument(
                "schedule start times must be strictly increasing".into(),
            ));
        }
        let n = segments[0].1.dim();
        if let Some((_, th)) = segments.iter().find(|(_, th)| th.dim() != n) {
            return Err(CoreError::DimensionMismatch {
                expected: n,
                found: th.dim(),
            });
        }
        Ok(Self { segments })
    }
}

impl Policy for SchedulePolicy {
    fn name(&self) -> &str {
        "schedule"
    }

    fn control(&self, _populations: &[f64], t: f64) -> Result<DoublyStochastic> {
        let idx = self.segments.partition_point(|(start, _)| *start <= t);
        Ok(self.segments[idx.saturating_sub(1)].1.clone())
    }
}

#[derive(Deserialize)]
struct ScheduleSegment {
    t: f64,
    theta: Vec<Vec<f64>>,
}

fn parse_theta(value: &Value) -> Result<DoublyStochastic> {
    let rows: Vec<Vec<f64>> = serde_json::from_value(value.clone())
        .map_err(|e| CoreError::InvalidArgument(format!("theta: {e}")))?;
    DoublyStochastic::from_rows(&rows)
}

/// Built-in policies: `identity`, `greedy`, `fixed` (`{"theta": [[..]]}`) and
/// `schedule` (`{"segments": [{"t": .., "theta": [[..]]}]}`).
pub fn policy_registry() -> Registry<dyn Policy> {
    let mut reg: Registry<dyn Policy> = Registry::new("policy");
    reg.register("identity", |_| Ok(Box::new(IdentityPolicy)));
    reg.register("greedy", |_| Ok(Box::new(GreedyPolicy)));
    reg.register("fixed", |p| {
        let theta = p
            .get("theta")
            .ok_or_else(|| CoreError::InvalidArgument("fixed policy needs `theta`".into()))?;
        Ok(Box::new(FixedPolicy::new(parse_theta(theta)?)))
    });
    reg.register("schedule", |p| {
        let raw = p
            .get("segments")
            .ok_or_else(|| CoreError::InvalidArgument("schedule policy needs `segments`".into()))?;
        let segs: Vec<ScheduleSegment> = serde_json::from_value(raw.clone())
            .map_err(|e| CoreError::InvalidArgument(format!("segments: {e}")))?;
        let segments = segs
            .into_iter()
            .map(|s| Ok((s.t, DoublyStochastic::from_rows(&s.theta)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(SchedulePolicy::new(segments)?))
    });
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn builtin_names() {
        assert_eq!(
            policy_registry().names(),
            vec!["fixed", "greedy", "identity", "schedule"]
        );
    }

    #[test]
    fn greedy_is_identity_and_order_maintaining() {
        let reg = policy_registry();
        let g = reg.build("greedy", &Value::Null).unwrap();
        assert!(g.order_maintaining());
        assert!(g.control(&[0.5, 0.3, 0.2], 0.0).unwrap().is_identity());
        let id = reg.build("identity", &Value::Null).unwrap();
        assert!(!id.order_maintaining());
    }

    #[test]
    fn schedule_switches_at_segment_starts() {
        let reg = policy_registry();
        let p = reg
            .build(
                "schedule",
                &json!({"segments": [
                    {"t": 0.0, "theta": [[1, 0], [0, 1]]},
                    {"t": 0.5, "theta": [[0, 1], [1, 0]]}
                ]}),
            )
            .unwrap();
        assert!(p.control(&[0.5, 0.5], 0.2).unwrap().is_identity());
        assert!(!p.control(&[0.5, 0.5], 0.5).unwrap().is_identity());
        assert!(!p.control(&[0.5, 0.5], 0.9).unwrap().is_identity());
    }

    #[test]
    fn malformed_parameters_are_rejected() {
        let reg = policy_registry();
        assert!(reg.build("fixed", &json!({})).is_err());
        assert!(reg
            .build("fixed", &json!({"theta": [[0.9, 0.1], [0.2, 0.8]]}))
            .is_err());
        assert!(reg.build("schedule", &json!({"segments": []})).is_err());
        assert!(reg.build("bang-bang", &Value::Null).is_err());
    }
}
