use purcool_core::density::{majorization_order, DensityMatrix, MajorizationOrder, Spectrum};
use purcool_core::hjb::{argmax_f, ObjectiveContext, SamplerConfig, TIE_TOL};
use purcool_core::lambda3::{greedy_closed_form, return_function, tau_star, LambdaSystem};
use purcool_core::lindblad::{propagate, ControlSchedule};
use purcool_core::spectral::spectral_propagate;
use purcool_core::spectral::{GreedyPolicy, IdentityPolicy};

fn sys() -> LambdaSystem {
    LambdaSystem::new(2.0, 1.0).unwrap()
}

#[test]
fn greedy_spectral_run_follows_closed_form() {
    let s = sys();
    let l0 = [0.5, 0.3, 0.2];
    let traj = spectral_propagate(&l0, &GreedyPolicy, &s.generator(), 1.5, 1e-4).unwrap();
    let spec0 = Spectrum::new(l0.to_vec()).unwrap();
    for sample in traj.samples.iter().step_by(500) {
        let want = greedy_closed_form(&spec0, sample.t, &s);
        let v = &sample.values;
        assert!((v[0] - want[0]).abs() < 2e-5, "t = {}", sample.t);
        // after equalization the sorted pair chatters by O(g·λ·dt)
        for k in 1..3 {
            assert!((v[k] - want[k]).abs() < 2e-4, "t = {}", sample.t);
        }
    }
    let ts = tau_star(&spec0, &s).unwrap();
    assert!((traj.first_reorder.unwrap() - ts).abs() < 1e-4);
    assert!((traj.last().values[0] - return_function(&spec0, 1.5, &s)).abs() < 2e-5);
}

#[test]
fn diagonal_lindblad_run_matches_identity_spectral_run() {
    let s = sys();
    let l0 = [0.2, 0.5, 0.3];
    let rho = DensityMatrix::from_diagonal(&l0).unwrap();
    let full = propagate(&rho, &s.rates(), &ControlSchedule::empty(), 1.0, 1e-3).unwrap();
    let spec = spectral_propagate(&l0, &IdentityPolicy, &s.generator(), 1.0, 1e-3).unwrap();
    let (_, last) = full.last().unwrap();
    for (a, b) in last.populations().iter().zip(&spec.last().values) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn greedy_trajectory_majorization() {
    let s = sys();
    let l0 = [0.4, 0.35, 0.25];
    let ts = tau_star(&Spectrum::new(l0.to_vec()).unwrap(), &s).unwrap();
    let traj = spectral_propagate(&l0, &GreedyPolicy, &s.generator(), 2.0, 1e-3).unwrap();
    for w in traj.samples.windows(2) {
        assert!(w[1].values[0] >= w[0].values[0]);
        let order = majorization_order(&w[1].values, &w[0].values).unwrap();
        if w[1].t < ts {
            // λ₁ grows while λ₁ + λ₂ shrinks at rate γ₂λ₂
            assert_eq!(order, MajorizationOrder::Incomparable, "t = {}", w[1].t);
        } else if w[0].t > ts + 0.01 {
            assert!(matches!(
                order,
                MajorizationOrder::GreaterThan | MajorizationOrder::Equal
            ));
        }
    }
}

#[test]
fn identity_is_certified_along_a_greedy_run() {
    let s = sys();
    let actions = SamplerConfig::default().build(3).unwrap();
    let t_final = 1.0;
    let traj = spectral_propagate(
        &[0.45, 0.35, 0.2],
        &GreedyPolicy,
        &s.generator(),
        t_final,
        1e-3,
    )
    .unwrap();
    for sample in traj.samples.iter().step_by(100) {
        let lam = Spectrum::new(sample.values.clone()).unwrap();
        let ctx = ObjectiveContext::for_lambda_system(&lam, t_final - sample.t, &s).unwrap();
        let (theta, _, report) = argmax_f(&ctx, &actions, TIE_TOL).unwrap();
        assert!(theta.is_identity(), "{report:?}");
    }
}
