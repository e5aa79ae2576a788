//! Likelihood-ratio policy-gradient estimators: REINFORCE, PGT, GPOMDP,
//! the step-wise importance-weighted GPOMDP estimator and the recursive
//! semi-stochastic gradient built from them.

use log::warn;

use crate::error::{Error, Result};
use crate::mdp::Trajectory;
use crate::policy::PolicySpec;
use crate::vector::{axpy, pairwise_mean, sub, GradEstimate, PolicyParams};

/// Importance weights larger than this are reported as overflow unless a
/// cap is configured.
pub const WEIGHT_OVERFLOW: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Reinforce,
    Pgt,
    Gpomdp,
}

impl EstimatorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reinforce" => Ok(Self::Reinforce),
            "pgt" => Ok(Self::Pgt),
            "gpomdp" => Ok(Self::Gpomdp),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Reinforce => "reinforce",
            Self::Pgt => "pgt",
            Self::Gpomdp => "gpomdp",
        }
    }
}

/// Constant baseline b_h, independent of actions and of θ.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Baseline {
    #[default]
    None,
    PerStep(Vec<f64>),
}

impl Baseline {
    fn value(&self, h: usize) -> f64 {
        match self {
            Self::None => 0.0,
            Self::PerStep(b) => b[h],
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        match self {
            Self::PerStep(b) if b.len() < len => Err(Error::InvalidInput(format!(
                "baseline has {} entries, trajectory has {len} steps",
                b.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// (Σ_h ∇ log π(a_h|s_h)) · (Σ_h γʰ r_h)
pub fn reinforce_grad(
    traj: &Trajectory,
    spec: &PolicySpec,
    params: &PolicyParams,
    gamma: f64,
) -> Result<GradEstimate> {
    spec.check_params(params)?;
    let mut total = vec![0.0; spec.dim()];
    for h in 0..traj.len() {
        spec.accumulate_score(params, &traj.states[h], traj.actions[h], 1.0, &mut total)?;
    }
    let ret = traj.discounted_return(gamma);
    GradEstimate::checked(total.into_iter().map(|x| x * ret).collect(), "reinforce_grad")
}

/// Σ_h ∇ log π(a_h|s_h) · Σ_{t≥h} (γᵗ r_t − b_t), computed from reward-to-go.
pub fn pgt_grad(
    traj: &Trajectory,
    spec: &PolicySpec,
    params: &PolicyParams,
    gamma: f64,
    baseline: &Baseline,
) -> Result<GradEstimate> {
    spec.check_params(params)?;
    baseline.check(traj.len())?;
    let n = traj.len();
    let mut to_go = vec![0.0; n];
    let mut discount = 1.0;
    let mut terms = Vec::with_capacity(n);
    for h in 0..n {
        terms.push(discount * traj.rewards[h] - baseline.value(h));
        discount *= gamma;
    }
    let mut acc = 0.0;
    for h in (0..n).rev() {
        acc += terms[h];
        to_go[h] = acc;
    }
    let mut grad = vec![0.0; spec.dim()];
    for h in 0..n {
        spec.accumulate_score(params, &traj.states[h], traj.actions[h], to_go[h], &mut grad)?;
    }
    GradEstimate::checked(grad, "pgt_grad")
}

/// Σ_h (Σ_{t≤h} ∇ log π(a_t|s_t)) · (γʰ r_h − b_h), with the cumulative
/// score kept incrementally.
pub fn gpomdp_grad(
    traj: &Trajectory,
    spec: &PolicySpec,
    params: &PolicyParams,
    gamma: f64,
    baseline: &Baseline,
) -> Result<GradEstimate> {
    spec.check_params(params)?;
    baseline.check(traj.len())?;
    let d = spec.dim();
    let mut cumulative = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut discount = 1.0;
    for h in 0..traj.len() {
        spec.accumulate_score(params, &traj.states[h], traj.actions[h], 1.0, &mut cumulative)?;
        axpy(discount * traj.rewards[h] - baseline.value(h), &cumulative, &mut grad);
        discount *= gamma;
    }
    GradEstimate::checked(grad, "gpomdp_grad")
}

pub fn estimate(
    kind: EstimatorKind,
    traj: &Trajectory,
    spec: &PolicySpec,
    params: &PolicyParams,
    gamma: f64,
    baseline: &Baseline,
) -> Result<GradEstimate> {
    match kind {
        EstimatorKind::Reinforce => reinforce_grad(traj, spec, params, gamma),
        EstimatorKind::Pgt => pgt_grad(traj, spec, params, gamma, baseline),
        EstimatorKind::Gpomdp => gpomdp_grad(traj, spec, params, gamma, baseline),
    }
}

/// log ω_{0:h} = Σ_{h'≤h} [log π_target(a_h'|s_h') − log π_behavior(a_h'|s_h')]
/// for every prefix h of the trajectory.
pub fn prefix_log_weights(
    traj: &Trajectory,
    spec: &PolicySpec,
    target: &PolicyParams,
    behavior: &PolicyParams,
) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    (0..traj.len())
        .map(|h| {
            let (s, a) = (&traj.states[h], traj.actions[h]);
            acc += spec.log_prob(target, s, a)? - spec.log_prob(behavior, s, a)?;
            Ok(acc)
        })
        .collect()
}

/// ω_{0:h}(τ | target, behavior) for a trajectory drawn from `behavior`.
pub fn prefix_importance_weight(
    traj: &Trajectory,
    spec: &PolicySpec,
    target: &PolicyParams,
    behavior: &PolicyParams,
    h: usize,
) -> Result<f64> {
    if h >= traj.len() {
        return Err(Error::InvalidInput(format!(
            "prefix {h} out of range for trajectory of length {}",
            traj.len()
        )));
    }
    let log_w = prefix_log_weights(traj, spec, target, behavior)?[h];
    let w = log_w.exp();
    if w > WEIGHT_OVERFLOW || !w.is_finite() {
        return Err(Error::WeightOverflow { log_weight: log_w });
    }
    Ok(w)
}

/// Running statistics of the importance weights seen while evaluating
/// weighted estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStats {
    pub count: usize,
    pub sum: f64,
    pub max: f64,
    pub capped: usize,
}

impl Default for WeightStats {
    fn default() -> Self {
        Self {
            count: 0,
            sum: 0.0,
            max: f64::NEG_INFINITY,
            capped: 0,
        }
    }
}

impl WeightStats {
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn merge(&mut self, other: &WeightStats) {
        self.count += other.count;
        self.sum += other.sum;
        self.max = self.max.max(other.max);
        self.capped += other.capped;
    }
}

/// Applies the optional cap to an importance weight given in log-space.
pub(crate) fn resolve_weight(log_w: f64, cap: Option<f64>, stats: &mut WeightStats) -> Result<f64> {
    let mut w = log_w.exp();
    match cap {
        Some(cap) if w > cap || log_w.is_nan() => {
            warn!("importance weight {w:.3e} capped at {cap:.1e}");
            stats.capped += 1;
            w = cap;
        }
        None if w > WEIGHT_OVERFLOW || !w.is_finite() => {
            return Err(Error::WeightOverflow { log_weight: log_w });
        }
        _ => {}
    }
    stats.count += 1;
    stats.sum += w;
    stats.max = stats.max.max(w);
    Ok(w)
}

/// Σ_h ω_{0:h}(τ | target, behavior) · (Σ_{t≤h} ∇ log π_target(a_t|s_t)) · γʰ r_h
/// for τ drawn from `behavior`. Its expectation under `behavior` equals
/// the GPOMDP expectation under `target`.
pub fn weighted_gpomdp_grad(
    traj: &Trajectory,
    spec: &PolicySpec,
    target: &PolicyParams,
    behavior: &PolicyParams,
    gamma: f64,
) -> Result<GradEstimate> {
    let mut stats = WeightStats::default();
    weighted_gpomdp_grad_with(traj, spec, target, behavior, gamma, None, &mut stats)
}

pub fn weighted_gpomdp_grad_with(
    traj: &Trajectory,
    spec: &PolicySpec,
    target: &PolicyParams,
    behavior: &PolicyParams,
    gamma: f64,
    cap: Option<f64>,
    stats: &mut WeightStats,
) -> Result<GradEstimate> {
    spec.check_params(target)?;
    spec.check_params(behavior)?;
    let log_weights = prefix_log_weights(traj, spec, target, behavior)?;
    let d = spec.dim();
    let mut cumulative = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut discount = 1.0;
    for h in 0..traj.len() {
        spec.accumulate_score(target, &traj.states[h], traj.actions[h], 1.0, &mut cumulative)?;
        let w = resolve_weight(log_weights[h], cap, stats)?;
        axpy(w * discount * traj.rewards[h], &cumulative, &mut grad);
        discount *= gamma;
    }
    GradEstimate::checked(grad, "weighted_gpomdp_grad")
}

/// v_t = v_{t−1} + (1/B) Σ_j [g(τ_j | θ_t) − g_ω(τ_j | θ_{t−1})] with every
/// τ_j drawn from θ_t and the weights moving θ_t to θ_{t−1}.
pub fn recursive_update(
    v_prev: &GradEstimate,
    batch: &[Trajectory],
    spec: &PolicySpec,
    params_t: &PolicyParams,
    params_prev: &PolicyParams,
    gamma: f64,
) -> Result<GradEstimate> {
    let mut stats = WeightStats::default();
    recursive_update_with(
        v_prev,
        batch,
        spec,
        params_t,
        params_prev,
        gamma,
        EstimatorKind::Gpomdp,
        None,
        &mut stats,
    )
}

/// Mean over the batch of `g(τ | current) − g_ω(τ | reference)`, the
/// control-variate correction shared by the recursive and SVRG-style
/// updates.
#[allow(clippy::too_many_arguments)]
pub(crate) fn correction_mean(
    batch: &[Trajectory],
    spec: &PolicySpec,
    current: &PolicyParams,
    reference: &PolicyParams,
    gamma: f64,
    kind: EstimatorKind,
    cap: Option<f64>,
    stats: &mut WeightStats,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let diffs = batch
        .iter()
        .map(|traj| {
            let g = estimate(kind, traj, spec, current, gamma, &Baseline::None)?;
            let gw = weighted_gpomdp_grad_with(traj, spec, reference, current, gamma, cap, stats)?;
            Ok(sub(&g, &gw))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_mean(&diffs).expect("non-empty batch"))
}

#[allow(clippy::too_many_arguments)]
pub fn recursive_update_with(
    v_prev: &GradEstimate,
    batch: &[Trajectory],
    spec: &PolicySpec,
    params_t: &PolicyParams,
    params_prev: &PolicyParams,
    gamma: f64,
    kind: EstimatorKind,
    cap: Option<f64>,
    stats: &mut WeightStats,
) -> Result<GradEstimate> {
    let correction = correction_mean(batch, spec, params_t, params_prev, gamma, kind, cap, stats)?;
    let mut v = v_prev.0.clone();
    axpy(1.0, &correction, &mut v);
    GradEstimate::checked(v, "recursive_update")
}

/// Mean estimator value over a batch (pairwise reduction).
pub fn batch_gradient(
    kind: EstimatorKind,
    batch: &[Trajectory],
    spec: &PolicySpec,
    params: &PolicyParams,
    gamma: f64,
    baseline: &Baseline,
) -> Result<GradEstimate> {
    let grads = batch
        .iter()
        .map(|t| estimate(kind, t, spec, params, gamma, baseline).map(GradEstimate::into_inner))
        .collect::<Result<Vec<_>>>()?;
    pairwise_mean(&grads).map(GradEstimate).ok_or(Error::EmptyBatch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{rollout, TabularMdp};
    use crate::vector::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_softmax_case(rng: &mut ChaCha8Rng, horizon: usize) -> (PolicySpec, PolicyParams, Trajectory) {
        let mdp = TabularMdp::random(3, 2, horizon, 1.0, rng);
        let spec = PolicySpec::softmax(3, 2);
        let params = PolicyParams((0..6).map(|_| rng.random_range(-1.5..1.5)).collect());
        let traj = rollout(&mdp, &spec, &params, horizon, rng).unwrap();
        (spec, params, traj)
    }

    #[test]
    fn zero_rewards_give_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (spec, params, mut traj) = random_softmax_case(&mut rng, 4);
        traj.rewards.iter_mut().for_each(|r| *r = 0.0);
        let other = PolicyParams(params.iter().map(|x| x + 0.3).collect());
        for g in [
            reinforce_grad(&traj, &spec, &params, 0.9).unwrap(),
            pgt_grad(&traj, &spec, &params, 0.9, &Baseline::None).unwrap(),
            gpomdp_grad(&traj, &spec, &params, 0.9, &Baseline::None).unwrap(),
            weighted_gpomdp_grad(&traj, &spec, &other, &params, 0.9).unwrap(),
        ] {
            assert!(g.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn single_step_estimators_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (spec, params, traj) = random_softmax_case(&mut rng, 1);
        let expected = spec.score(&params, &traj.states[0], traj.actions[0]).unwrap();
        let expected: Vec<f64> = expected.iter().map(|x| x * traj.rewards[0]).collect();
        for g in [
            reinforce_grad(&traj, &spec, &params, 0.9).unwrap(),
            pgt_grad(&traj, &spec, &params, 0.9, &Baseline::None).unwrap(),
            gpomdp_grad(&traj, &spec, &params, 0.9, &Baseline::None).unwrap(),
        ] {
            assert!(max_abs_diff(&g, &expected) < 1e-15);
        }
    }

    #[test]
    fn pgt_equals_gpomdp_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (spec, params, traj) = random_softmax_case(&mut rng, 6);
            let a = pgt_grad(&traj, &spec, &params, 0.95, &Baseline::None).unwrap();
            let b = gpomdp_grad(&traj, &spec, &params, 0.95, &Baseline::None).unwrap();
            assert!(max_abs_diff(&a, &b) <= 1e-10);
        }
    }

    #[test]
    fn pgt_equals_gpomdp_with_constant_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let baseline = Baseline::PerStep(vec![0.1, -0.2, 0.3, 0.05, 0.0, 0.7]);
        for _ in 0..50 {
            let (spec, params, traj) = random_softmax_case(&mut rng, 6);
            let a = pgt_grad(&traj, &spec, &params, 0.9, &baseline).unwrap();
            let b = gpomdp_grad(&traj, &spec, &params, 0.9, &baseline).unwrap();
            assert!(max_abs_diff(&a, &b) <= 1e-10);
        }
    }

    #[test]
    fn short_baseline_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (spec, params, traj) = random_softmax_case(&mut rng, 5);
        let baseline = Baseline::PerStep(vec![0.0; 2]);
        assert!(pgt_grad(&traj, &spec, &params, 0.9, &baseline).is_err());
        assert!(gpomdp_grad(&traj, &spec, &params, 0.9, &baseline).is_err());
    }

    #[test]
    fn identical_policies_have_unit_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (spec, params, traj) = random_softmax_case(&mut rng, 5);
        for h in 0..traj.len() {
            assert_eq!(prefix_importance_weight(&traj, &spec, &params, &params, h).unwrap(), 1.0);
        }
        let w = weighted_gpomdp_grad(&traj, &spec, &params, &params, 0.9).unwrap();
        let g = gpomdp_grad(&traj, &spec, &params, 0.9, &Baseline::None).unwrap();
        assert_eq!(w, g);
        assert!(prefix_importance_weight(&traj, &spec, &params, &params, traj.len()).is_err());
    }

    #[test]
    fn gaussian_single_step_weight() {
        // behavior mean 0, target mean 1, σ = 1, a = 0: exp(log π₁(0) − log π₀(0)) = e^{-1/2}
        let spec = PolicySpec::linear(1, 1.0);
        let behavior = PolicyParams(vec![0.0, 0.0]);
        let target = PolicyParams(vec![0.0, 1.0]);
        let traj = Trajectory {
            states: vec![vec![0.0], vec![0.0]],
            actions: vec![0.0],
            rewards: vec![1.0],
        };
        let w = prefix_importance_weight(&traj, &spec, &target, &behavior, 0).unwrap();
        assert!((w - (-0.5f64).exp()).abs() < 1e-15);
        assert!((w - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn weight_overflow_is_flagged_and_cap_applies() {
        let spec = PolicySpec::linear(1, 0.1);
        let behavior = PolicyParams(vec![0.0, 0.0]);
        let target = PolicyParams(vec![0.0, 1.0]);
        let traj = Trajectory {
            states: vec![vec![0.0]; 4],
            actions: vec![1.0, 1.0, 1.0],
            rewards: vec![1.0; 3],
        };
        assert!(matches!(
            weighted_gpomdp_grad(&traj, &spec, &target, &behavior, 0.9),
            Err(Error::WeightOverflow { .. })
        ));
        let mut stats = WeightStats::default();
        let g = weighted_gpomdp_grad_with(&traj, &spec, &target, &behavior, 0.9, Some(1e6), &mut stats)
            .unwrap();
        assert!(g.is_finite());
        assert!(stats.capped > 0);
        assert_eq!(stats.max, 1e6);
    }

    #[test]
    fn recursion_is_stationary_when_params_do_not_move() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mdp = TabularMdp::random(2, 2, 4, 1.0, &mut rng);
        let spec = PolicySpec::softmax(2, 2);
        let params = PolicyParams(vec![0.2, -0.4, 0.9, 0.1]);
        let batch: Vec<_> = (0..10)
            .map(|_| rollout(&mdp, &spec, &params, 4, &mut rng).unwrap())
            .collect();
        let v_prev = GradEstimate(vec![0.5, -1.0, 2.0, 0.25]);
        let v = recursive_update(&v_prev, &batch, &spec, &params, &params, 0.9).unwrap();
        assert_eq!(v, v_prev);
        let zero = GradEstimate::zeros(4);
        assert_eq!(recursive_update(&zero, &batch, &spec, &params, &params, 0.9).unwrap(), zero);
        assert!(matches!(
            recursive_update(&zero, &[], &spec, &params, &params, 0.9),
            Err(Error::EmptyBatch)
        ));
    }
}
