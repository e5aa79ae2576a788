use pglab::estimator::{estimate, gpomdp_grad, pgt_grad, Baseline, EstimatorKind};
use pglab::mdp::{enumerate_trajectories, rollout, TabularMdp};
use pglab::oracle::{
    default_oracle_mdp, default_oracle_policy, exact_gradient, exact_performance, finite_diff_gradient,
    TrajectorySpace,
};
use pglab::policy::PolicySpec;
use pglab::vector::{max_abs_diff, max_rel_err};
use pglab::PolicyParams;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_mdp() -> impl Strategy<Value = (TabularMdp, PolicyParams, f64)> {
    (1usize..=3, 1usize..=3, 1usize..=4, any::<u64>(), 0.1f64..0.99).prop_map(|(ns, na, h, seed, gamma)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = TabularMdp::random(ns, na, h, 1.0, &mut rng);
        let theta = PolicyParams(
            (0..ns * na)
                .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
                .collect(),
        );
        (mdp, theta, gamma)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_mass_is_one((mdp, theta, _gamma) in small_mdp()) {
        let spec = PolicySpec::softmax(mdp.n_states, mdp.n_actions);
        let space = TrajectorySpace::new(&mdp).unwrap();
        let total = space.total_probability(&spec, &theta).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn estimators_are_unbiased_on_random_mdps((mdp, theta, gamma) in small_mdp()) {
        let spec = PolicySpec::softmax(mdp.n_states, mdp.n_actions);
        let space = TrajectorySpace::new(&mdp).unwrap();
        let exact = space.gradient_by_product_rule(&spec, &theta, gamma).unwrap();
        for kind in [EstimatorKind::Reinforce, EstimatorKind::Pgt, EstimatorKind::Gpomdp] {
            let m = space.moments(&spec, &theta, kind, gamma).unwrap();
            prop_assert!(max_abs_diff(&m.mean, &exact) < 1e-11);
        }
    }

    #[test]
    fn pgt_equals_gpomdp_with_baseline((mdp, theta, gamma) in small_mdp(), seed in any::<u64>()) {
        let spec = PolicySpec::softmax(mdp.n_states, mdp.n_actions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let baseline = Baseline::PerStep((0..mdp.horizon).map(|h| 0.1 * h as f64 - 0.2).collect());
        for _ in 0..10 {
            let t = rollout(&mdp, &spec, &theta, mdp.horizon, &mut rng).unwrap();
            let a = pgt_grad(&t, &spec, &theta, gamma, &baseline).unwrap();
            let b = gpomdp_grad(&t, &spec, &theta, gamma, &baseline).unwrap();
            prop_assert!(max_abs_diff(&a, &b) < 1e-10);
        }
    }
}

#[test]
fn baseline_keeps_estimators_unbiased() {
    let mdp = default_oracle_mdp();
    let spec = default_oracle_policy();
    let space = TrajectorySpace::new(&mdp).unwrap();
    let theta = PolicyParams(vec![0.3, -0.4, 1.1, 0.2]);
    let exact = space.gradient(&spec, &theta, 0.9).unwrap();
    let baseline = Baseline::PerStep(vec![0.5, -0.25, 0.75]);
    for kind in [EstimatorKind::Pgt, EstimatorKind::Gpomdp] {
        let mean = space
            .expectation(&spec, &theta, |t| estimate(kind, t, &spec, &theta, 0.9, &baseline).map(|g| g.0))
            .unwrap();
        assert!(max_abs_diff(&mean, &exact) < 1e-12);
    }
}

#[test]
fn gpomdp_variance_does_not_exceed_reinforce() {
    let mdp = TabularMdp::random(3, 2, 5, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
    let spec = PolicySpec::softmax(3, 2);
    let space = TrajectorySpace::new(&mdp).unwrap();
    let theta = PolicyParams(vec![0.2, -0.1, 0.5, 0.3, -0.7, 0.0]);
    let r = space.moments(&spec, &theta, EstimatorKind::Reinforce, 0.95).unwrap();
    let g = space.moments(&spec, &theta, EstimatorKind::Gpomdp, 0.95).unwrap();
    assert!(g.variance_trace <= r.variance_trace);
}

#[test]
fn exact_gradient_matches_finite_differences_on_larger_mdp() {
    let mdp = TabularMdp::random(3, 3, 4, 2.0, &mut ChaCha8Rng::seed_from_u64(8));
    let spec = PolicySpec::softmax(3, 3);
    let theta = PolicyParams(vec![0.1, 0.4, -0.3, 0.9, -1.2, 0.0, 0.5, 0.5, -0.5]);
    let exact = exact_gradient(&mdp, &spec, &theta, 0.8).unwrap();
    let fd = finite_diff_gradient(|p| exact_performance(&mdp, &spec, p, 0.8), &theta, 1e-5).unwrap();
    assert!(max_rel_err(&exact, &fd) < 1e-6);
}

#[test]
fn single_state_single_action_has_one_path() {
    let mdp = TabularMdp::new(1, 1, 2, vec![1.0], vec![vec![1.0]], vec![vec![0.5]]).unwrap();
    let paths = enumerate_trajectories(&mdp, 2).unwrap();
    assert_eq!(paths.len(), 1);
    assert_eq!(paths[0].1, 1.0);
}
