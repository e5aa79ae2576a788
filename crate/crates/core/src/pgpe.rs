//! Parameter-based exploration: a diagonal Gaussian over policy parameters,
//! a deterministic policy for each sampled parameter vector, and gradients
//! with respect to the hyper-parameters.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{resolve_weight, WeightStats};
use crate::mdp::{rollout_with, Environment, Trajectory};
use crate::optimizer::{run_plain_ascent, run_recursive, GradientSampler, RunHistory, SrvrPgConfig};
use crate::policy::PolicySpec;
use crate::vector::{axpy, pairwise_mean, GradEstimate, PolicyParams};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub mu: Vec<f64>,
    pub log_std: Vec<f64>,
    /// When false the log_std block is frozen and left out of the
    /// optimized vector.
    pub learn_std: bool,
}

impl HyperParams {
    pub fn new(mu: Vec<f64>, std: f64, learn_std: bool) -> Result<Self> {
        if !(std.is_finite() && std > 0.0) {
            return Err(Error::InvalidInput(format!("hyper std must be positive, got {std}")));
        }
        let log_std = vec![std.ln(); mu.len()];
        let h = Self { mu, log_std, learn_std };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.len() != self.log_std.len() {
            return Err(Error::ShapeMismatch { expected: self.mu.len(), actual: self.log_std.len() });
        }
        if !self.mu.iter().all(|x| x.is_finite()) || !self.log_std.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("hyper-parameters".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    /// Length of the optimized vector: d, or 2d with a learned std.
    pub fn vector_dim(&self) -> usize {
        if self.learn_std { 2 * self.dim() } else { self.dim() }
    }

    /// Flattened (μ[, log_std]).
    pub fn to_vector(&self) -> PolicyParams {
        let mut v = self.mu.clone();
        if self.learn_std {
            v.extend_from_slice(&self.log_std);
        }
        PolicyParams(v)
    }

    /// Inverse of `to_vector`, taking the frozen block from `self`.
    pub fn with_vector(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.vector_dim() {
            return Err(Error::ShapeMismatch { expected: self.vector_dim(), actual: v.len() });
        }
        let d = self.dim();
        let h = Self {
            mu: v[..d].to_vec(),
            log_std: if self.learn_std { v[d..].to_vec() } else { self.log_std.clone() },
            learn_std: self.learn_std,
        };
        h.validate()?;
        Ok(h)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::ShapeMismatch { expected: self.dim(), actual: theta.len() });
        }
        Ok(())
    }
}

/// θ = μ + std ⊙ z.
pub fn params_from_noise(hyper: &HyperParams, z: &[f64]) -> Result<PolicyParams> {
    hyper.check_theta(z)?;
    Ok(PolicyParams(
        hyper.mu.iter().zip(&hyper.log_std).zip(z).map(|((m, l), z)| m + l.exp() * z).collect(),
    ))
}

pub fn sample_policy_params(hyper: &HyperParams, rng: &mut dyn RngCore) -> PolicyParams {
    let z: Vec<f64> = (0..hyper.dim()).map(|_| StandardNormal.sample(rng)).collect();
    params_from_noise(hyper, &z).expect("noise has the hyper dimension")
}

pub fn log_density(hyper: &HyperParams, theta: &[f64]) -> Result<f64> {
    hyper.check_theta(theta)?;
    let mut acc = -0.5 * LN_2PI * hyper.dim() as f64;
    for ((t, m), l) in theta.iter().zip(&hyper.mu).zip(&hyper.log_std) {
        let u = (t - m) / l.exp();
        acc -= 0.5 * u * u + l;
    }
    Ok(acc)
}

/// ∇_ρ log p(θ|ρ) over the optimized vector.
pub fn hyper_score(hyper: &HyperParams, theta: &[f64]) -> Result<GradEstimate> {
    hyper.check_theta(theta)?;
    let d = hyper.dim();
    let mut g = Vec::with_capacity(hyper.vector_dim());
    let mut sq = Vec::with_capacity(d);
    for ((t, m), l) in theta.iter().zip(&hyper.mu).zip(&hyper.log_std) {
        let var = (2.0 * l).exp();
        let diff = t - m;
        g.push(diff / var);
        sq.push(diff * diff / var - 1.0);
    }
    if hyper.learn_std {
        g.extend(sq);
    }
    GradEstimate::checked(g, "hyper_score")
}

/// Mean over the batch of ∇_ρ log p(θ_i|ρ) · R(τ_i).
pub fn pgpe_grad(
    batch: &[(PolicyParams, Trajectory)],
    hyper: &HyperParams,
    gamma: f64,
) -> Result<GradEstimate> {
    let terms = batch
        .iter()
        .map(|(theta, traj)| {
            let mut g = hyper_score(hyper, theta)?.into_inner();
            let ret = traj.discounted_return(gamma);
            g.iter_mut().for_each(|x| *x *= ret);
            Ok(g)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = pairwise_mean(&terms).ok_or(Error::EmptyBatch)?;
    GradEstimate::checked(mean, "pgpe_grad")
}

/// One episode with the deterministic policy a = μ_θ(s).
pub fn deterministic_rollout<E: Environment + ?Sized>(
    env: &E,
    spec: &PolicySpec,
    params: &PolicyParams,
    horizon: usize,
    rng: &mut dyn RngCore,
) -> Result<Trajectory> {
    spec.check_params(params)?;
    rollout_with(env, horizon, rng, |obs, _| spec.mean(params, obs))
}

/// Parameter-space gradient model over the flattened hyper vector.
pub struct ParamSampler<'a, E: ?Sized> {
    pub env: &'a E,
    pub spec: &'a PolicySpec,
    pub template: HyperParams,
    pub gamma: f64,
    pub horizon: usize,
}

impl<E: ?Sized> ParamSampler<'_, E> {
    fn hyper(&self, rho: &PolicyParams) -> Result<HyperParams> {
        self.template.with_vector(rho)
    }
}

impl<E: Environment + ?Sized> GradientSampler for ParamSampler<'_, E> {
    type Sample = (PolicyParams, Trajectory);

    fn sample(&self, rho: &PolicyParams, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Self::Sample>> {
        let hyper = self.hyper(rho)?;
        let seeds: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
        seeds
            .into_par_iter()
            .map(|seed| {
                let mut child = ChaCha8Rng::seed_from_u64(seed);
                let theta = sample_policy_params(&hyper, &mut child);
                let traj = deterministic_rollout(self.env, self.spec, &theta, self.horizon, &mut child)?;
                Ok((theta, traj))
            })
            .collect()
    }

    fn average_return(&self, batch: &[Self::Sample]) -> f64 {
        batch.iter().map(|(_, t)| t.undiscounted_return()).sum::<f64>() / batch.len() as f64
    }

    fn gradient(&self, batch: &[Self::Sample], rho: &PolicyParams) -> Result<GradEstimate> {
        pgpe_grad(batch, &self.hyper(rho)?, self.gamma)
    }

    /// Mean of g(θ_j|ρ_cur) − ω·g(θ_j|ρ_ref), ω = p(θ_j|ρ_ref)/p(θ_j|ρ_cur).
    fn correction(
        &self,
        batch: &[Self::Sample],
        current: &PolicyParams,
        reference: &PolicyParams,
        cap: Option<f64>,
        stats: &mut WeightStats,
    ) -> Result<Vec<f64>> {
        let cur = self.hyper(current)?;
        let refr = self.hyper(reference)?;
        let mut terms = Vec::with_capacity(batch.len());
        for (theta, traj) in batch {
            let ret = traj.discounted_return(self.gamma);
            let log_w = log_density(&refr, theta)? - log_density(&cur, theta)?;
            let w = resolve_weight(log_w, cap, stats)?;
            let mut g = hyper_score(&cur, theta)?.into_inner();
            g.iter_mut().for_each(|x| *x *= ret);
            axpy(-w * ret, &hyper_score(&refr, theta)?, &mut g);
            terms.push(g);
        }
        let mean = pairwise_mean(&terms).ok_or(Error::EmptyBatch)?;
        GradEstimate::checked(mean, "pgpe correction").map(GradEstimate::into_inner)
    }
}

fn check_hyper(spec: &PolicySpec, hyper: &HyperParams) -> Result<()> {
    hyper.validate()?;
    if hyper.dim() != spec.dim() {
        return Err(Error::ShapeMismatch { expected: spec.dim(), actual: hyper.dim() });
    }
    Ok(())
}

/// Recursive variance-reduced ascent on ρ. The optimized vector in the
/// returned history is the flattened hyper vector; no projection applies.
pub fn srvr_pg_pe_run<E: Environment + ?Sized>(
    config: &SrvrPgConfig,
    env: &E,
    spec: &PolicySpec,
    init: &HyperParams,
    rng: &mut dyn RngCore,
) -> Result<RunHistory> {
    check_hyper(spec, init)?;
    let sampler = ParamSampler { env, spec, template: init.clone(), gamma: config.gamma, horizon: config.horizon };
    run_recursive(config, &sampler, &init.to_vector(), false, rng)
}

/// ρ_{k+1} = ρ_k + η ĝ(ρ_k), batch N per iteration.
pub fn pgpe_run<E: Environment + ?Sized>(
    config: &SrvrPgConfig,
    env: &E,
    spec: &PolicySpec,
    init: &HyperParams,
    rng: &mut dyn RngCore,
) -> Result<RunHistory> {
    check_hyper(spec, init)?;
    let sampler = ParamSampler { env, spec, template: init.clone(), gamma: config.gamma, horizon: config.horizon };
    run_plain_ascent(config, &sampler, &init.to_vector(), false, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::LinearBandit;
    use crate::oracle::finite_diff_gradient;
    use crate::vector::max_rel_err;

    fn hyper(learn: bool) -> HyperParams {
        HyperParams { mu: vec![0.3, -1.2, 0.5], log_std: vec![-0.4, 0.2, 0.0], learn_std: learn }
    }

    #[test]
    fn zero_noise_is_mean() {
        let h = hyper(true);
        assert_eq!(params_from_noise(&h, &[0.0; 3]).unwrap().0, h.mu);
    }

    #[test]
    fn sampled_moments() {
        let h = hyper(false);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let t = sample_policy_params(&h, &mut rng);
            for i in 0..3 {
                sum[i] += t[i];
                sq[i] += t[i] * t[i];
            }
        }
        for i in 0..3 {
            let mean = sum[i] / n as f64;
            let var = sq[i] / n as f64 - mean * mean;
            let std = h.log_std[i].exp();
            assert!((mean - h.mu[i]).abs() < 4.0 * std / (n as f64).sqrt());
            // sd of the sample std is about std/√(2n)
            assert!((var.sqrt() - std).abs() < 4.0 * std / (2.0 * n as f64).sqrt());
        }
    }

    #[test]
    fn same_seed_same_theta() {
        let h = hyper(false);
        let a = sample_policy_params(&h, &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_policy_params(&h, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn score_at_mode() {
        let h = hyper(true);
        let g = hyper_score(&h, &h.mu).unwrap();
        assert_eq!(&g[..3], &[0.0; 3]);
        assert_eq!(&g[3..], &[-1.0; 3]);
        assert_eq!(hyper_score(&hyper(false), &h.mu).unwrap().dim(), 3);
    }

    #[test]
    fn score_matches_finite_differences() {
        let h = hyper(true);
        let theta = [1.0, -0.7, 0.1];
        let g = hyper_score(&h, &theta).unwrap();
        let fd = finite_diff_gradient(
            |v| log_density(&h.with_vector(v).unwrap(), &theta),
            &h.to_vector(),
            1e-5,
        )
        .unwrap();
        assert!(max_rel_err(&g, &fd) < 1e-6);
    }

    #[test]
    fn density_normalizes_in_one_dim() {
        let h = HyperParams { mu: vec![0.4], log_std: vec![-0.3], learn_std: false };
        let (lo, hi, n) = (-8.0, 8.0, 20_000);
        let dx = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| log_density(&h, &[lo + (i as f64 + 0.5) * dx]).unwrap().exp() * dx)
            .sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_returns_give_zero_grad() {
        let h = hyper(false);
        let traj = Trajectory { states: vec![vec![0.0]; 3], actions: vec![0.0; 2], rewards: vec![0.0; 2] };
        let batch = vec![(PolicyParams(vec![1.0, 2.0, 3.0]), traj)];
        assert_eq!(pgpe_grad(&batch, &h, 0.9).unwrap().0, vec![0.0; 3]);
        assert!(matches!(pgpe_grad(&[], &h, 0.9), Err(Error::EmptyBatch)));
    }

    #[test]
    fn deterministic_rollouts_repeat() {
        let env = crate::mdp::CartPole::new(50);
        let spec = PolicySpec::linear(4, 1.0);
        let params = PolicyParams(vec![0.1, -0.2, 0.3, 0.4, 0.0]);
        let a = deterministic_rollout(&env, &spec, &params, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = deterministic_rollout(&env, &spec, &params, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equal_hyper_leaves_direction_unchanged() {
        let env = LinearBandit::new(vec![0.6], 1.0, 3);
        let spec = PolicySpec::linear(1, 1.0);
        let h = HyperParams::new(vec![0.2, -0.1], 0.5, true).unwrap();
        let sampler = ParamSampler { env: &env, spec: &spec, template: h.clone(), gamma: 0.9, horizon: 3 };
        let rho = h.to_vector();
        let batch = sampler.sample(&rho, 16, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut stats = WeightStats::default();
        let c = sampler.correction(&batch, &rho, &rho, None, &mut stats).unwrap();
        assert!(c.iter().all(|&x| x == 0.0));
        assert!((stats.mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn step_size_zero_freezes_hyper() {
        let env = LinearBandit::new(vec![0.6], 1.0, 3);
        let spec = PolicySpec::linear(1, 1.0);
        let h = HyperParams::new(vec![0.2, -0.1], 0.5, false).unwrap();
        let cfg = SrvrPgConfig { epochs: 3, epoch_len: 2, step_size: 0.0, snapshot_batch: 4, inner_batch: 2, horizon: 3, ..Default::default() };
        let hist = srvr_pg_pe_run(&cfg, &env, &spec, &h, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(hist.final_params, h.to_vector());
        assert_eq!(hist.total_trajectories, 3 * 4 + 3 * 2);
        let hist = pgpe_run(&cfg, &env, &spec, &h, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(hist.final_params, h.to_vector());
    }
}
