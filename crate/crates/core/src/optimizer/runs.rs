use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{project, AbortInfo, OutputRule, RunHistory, SrvrPgConfig, UpdateRecord};
use crate::error::{Error, Result};
use crate::estimator::{correction_mean, estimate, Baseline, EstimatorKind, WeightStats};
use crate::mdp::{rollout, Environment, Trajectory};
use crate::policy::PolicySpec;
use crate::vector::{axpy, max_abs_diff, pairwise_mean, GradEstimate, PolicyParams};

/// What a run loop needs from a gradient model: batch sampling at given
/// parameters, the plain batch gradient, and the importance-weighted
/// control-variate correction mean of `g(·|current) − g_ω(·|reference)`.
pub trait GradientSampler: Sync {
    type Sample: Send + Sync;

    fn sample(&self, params: &PolicyParams, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Self::Sample>>;

    /// Mean undiscounted episode return of a batch.
    fn average_return(&self, batch: &[Self::Sample]) -> f64;

    fn gradient(&self, batch: &[Self::Sample], params: &PolicyParams) -> Result<GradEstimate>;

    fn correction(
        &self,
        batch: &[Self::Sample],
        current: &PolicyParams,
        reference: &PolicyParams,
        cap: Option<f64>,
        stats: &mut WeightStats,
    ) -> Result<Vec<f64>>;
}

/// Action-space policy gradients: trajectories from a stochastic policy.
pub struct ActionSampler<'a, E: ?Sized> {
    pub env: &'a E,
    pub spec: &'a PolicySpec,
    pub gamma: f64,
    pub horizon: usize,
    pub estimator: EstimatorKind,
    pub baseline: Baseline,
}

impl<'a, E: Environment + ?Sized> ActionSampler<'a, E> {
    pub fn new(env: &'a E, spec: &'a PolicySpec, config: &SrvrPgConfig) -> Self {
        Self {
            env,
            spec,
            gamma: config.gamma,
            horizon: config.horizon,
            estimator: config.estimator,
            baseline: config.baseline.clone(),
        }
    }
}

/// One child seed per episode, drawn from the run rng in order, so batch
/// contents do not depend on how rollouts are scheduled.
pub(crate) fn child_seeds(n: usize, rng: &mut dyn RngCore) -> Vec<u64> {
    (0..n).map(|_| rng.next_u64()).collect()
}

impl<E: Environment + ?Sized> GradientSampler for ActionSampler<'_, E> {
    type Sample = Trajectory;

    fn sample(&self, params: &PolicyParams, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Trajectory>> {
        child_seeds(n, rng)
            .into_par_iter()
            .map(|seed| {
                let mut child = ChaCha8Rng::seed_from_u64(seed);
                rollout(self.env, self.spec, params, self.horizon, &mut child)
            })
            .collect()
    }

    fn average_return(&self, batch: &[Trajectory]) -> f64 {
        batch.iter().map(Trajectory::undiscounted_return).sum::<f64>() / batch.len() as f64
    }

    fn gradient(&self, batch: &[Trajectory], params: &PolicyParams) -> Result<GradEstimate> {
        let grads = batch
            .par_iter()
            .map(|t| {
                estimate(self.estimator, t, self.spec, params, self.gamma, &self.baseline)
                    .map(GradEstimate::into_inner)
            })
            .collect::<Result<Vec<_>>>()?;
        pairwise_mean(&grads).map(GradEstimate).ok_or(Error::EmptyBatch)
    }

    fn correction(
        &self,
        batch: &[Trajectory],
        current: &PolicyParams,
        reference: &PolicyParams,
        cap: Option<f64>,
        stats: &mut WeightStats,
    ) -> Result<Vec<f64>> {
        correction_mean(batch, self.spec, current, reference, self.gamma, self.estimator, cap, stats)
    }
}

fn is_numeric_failure(e: &Error) -> bool {
    matches!(e, Error::NonFinite(_) | Error::WeightOverflow { .. })
}

/// Book-keeping shared by the loops.
struct Tracker {
    config: SrvrPgConfig,
    project: bool,
    consumed: usize,
    records: Vec<UpdateRecord>,
    iterates: Vec<PolicyParams>,
    stats: WeightStats,
    aborted: Option<AbortInfo>,
}

impl Tracker {
    fn new(config: &SrvrPgConfig, project: bool) -> Self {
        Self {
            config: config.clone(),
            project,
            consumed: 0,
            records: Vec::new(),
            iterates: Vec::new(),
            stats: WeightStats::default(),
            aborted: None,
        }
    }

    fn can_sample(&self, n: usize) -> bool {
        self.config
            .trajectory_budget
            .is_none_or(|budget| self.consumed + n <= budget)
    }

    fn take<S: GradientSampler>(
        &mut self,
        sampler: &S,
        params: &PolicyParams,
        n: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<S::Sample>> {
        let batch = sampler.sample(params, n, rng)?;
        self.consumed += n;
        Ok(batch)
    }

    /// Records the update and returns the next iterate P_Θ(θ + η·v).
    fn step(
        &mut self,
        epoch: usize,
        step: usize,
        avg_return: f64,
        theta: &PolicyParams,
        direction: &GradEstimate,
    ) -> Result<PolicyParams> {
        if !direction.is_finite() {
            return Err(Error::NonFinite("update direction".into()));
        }
        self.records.push(UpdateRecord {
            trajectories: self.consumed,
            epoch,
            step,
            avg_return,
            update_norm: direction.norm(),
        });
        if self.config.output_rule == OutputRule::Uniform {
            self.iterates.push(theta.clone());
        }
        let mut next = theta.clone();
        axpy(self.config.step_size, direction, &mut next);
        if self.project {
            next = project(&next, &self.config.constraint)?;
        }
        if !next.is_finite() {
            return Err(Error::NonFinite("policy parameters".into()));
        }
        Ok(next)
    }

    fn abort(&mut self, epoch: usize, step: usize, err: &Error) {
        log::error!("run aborted at epoch {epoch}, step {step}: {err}");
        self.aborted = Some(AbortInfo {
            epoch,
            step,
            reason: err.to_string(),
            max_weight: self.stats.max,
            mean_weight: self.stats.mean(),
        });
    }

    fn finish(self, last: PolicyParams, rng: &mut dyn RngCore) -> RunHistory {
        let output_params = match self.config.output_rule {
            OutputRule::Uniform if !self.iterates.is_empty() => {
                self.iterates[rng.random_range(0..self.iterates.len())].clone()
            }
            _ => last.clone(),
        };
        RunHistory {
            records: self.records,
            final_params: last,
            output_params,
            total_trajectories: self.consumed,
            weight_stats: self.stats,
            aborted: self.aborted,
        }
    }
}

fn check_start(config: &SrvrPgConfig, init: &PolicyParams, project_on: bool) -> Result<()> {
    config.validate()?;
    if !init.is_finite() {
        return Err(Error::InvalidInput("initial parameters are not finite".into()));
    }
    if project_on && max_abs_diff(&project(init, &config.constraint)?, init) > 1e-12 {
        return Err(Error::InvalidInput("initial parameters lie outside the constraint set".into()));
    }
    Ok(())
}

/// Epoch loop with the recursive estimator: a large-batch gradient at the
/// snapshot followed immediately by an update, then m−1 inner steps that
/// each correct the previous direction with a small importance-weighted
/// batch.
pub(crate) fn run_recursive<S: GradientSampler>(
    config: &SrvrPgConfig,
    sampler: &S,
    init: &PolicyParams,
    project_on: bool,
    rng: &mut dyn RngCore,
) -> Result<RunHistory> {
    check_start(config, init, project_on)?;
    let mut tracker = Tracker::new(config, project_on);
    let mut theta = init.clone();

    'epochs: for epoch in 0..config.epochs {
        if !tracker.can_sample(config.snapshot_batch) {
            break;
        }
        let snapshot = theta.clone();
        let batch = tracker.take(sampler, &snapshot, config.snapshot_batch, rng)?;
        let outcome = sampler.gradient(&batch, &snapshot).and_then(|v| {
            let next = tracker.step(epoch, 0, sampler.average_return(&batch), &snapshot, &v)?;
            Ok((v, next))
        });
        let (mut v, mut current) = match outcome {
            Ok(x) => x,
            Err(e) if is_numeric_failure(&e) => {
                tracker.abort(epoch, 0, &e);
                break;
            }
            Err(e) => return Err(e),
        };
        let mut previous = snapshot;
        theta = current.clone();

        for step in 1..config.epoch_len {
            if !tracker.can_sample(config.inner_batch) {
                break 'epochs;
            }
            let batch = tracker.take(sampler, &current, config.inner_batch, rng)?;
            let outcome = sampler
                .correction(&batch, &current, &previous, config.weight_cap, &mut tracker.stats)
                .and_then(|correction| {
                    let mut next_v = v.0.clone();
                    axpy(1.0, &correction, &mut next_v);
                    let next_v = GradEstimate::checked(next_v, "recursive gradient")?;
                    let next = tracker.step(epoch, step, sampler.average_return(&batch), &current, &next_v)?;
                    Ok((next_v, next))
                });
            match outcome {
                Ok((next_v, next)) => {
                    v = next_v;
                    previous = std::mem::replace(&mut current, next);
                    theta = current.clone();
                }
                Err(e) if is_numeric_failure(&e) => {
                    tracker.abort(epoch, step, &e);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(tracker.finish(theta, rng))
}

/// SVRG-style loop: the snapshot gradient is computed without an update
/// and every inner step (including the first) samples a fresh batch and
/// corrects the fixed snapshot gradient.
pub(crate) fn run_svrg<S: GradientSampler>(
    config: &SrvrPgConfig,
    sampler: &S,
    init: &PolicyParams,
    project_on: bool,
    rng: &mut dyn RngCore,
) -> Result<RunHistory> {
    check_start(config, init, project_on)?;
    let mut tracker = Tracker::new(config, project_on);
    let mut theta = init.clone();

    'epochs: for epoch in 0..config.epochs {
        if !tracker.can_sample(config.snapshot_batch) {
            break;
        }
        let snapshot = theta.clone();
        let batch = tracker.take(sampler, &snapshot, config.snapshot_batch, rng)?;
        let mu = match sampler.gradient(&batch, &snapshot) {
            Ok(mu) => mu,
            Err(e) if is_numeric_failure(&e) => {
                tracker.abort(epoch, 0, &e);
                break;
            }
            Err(e) => return Err(e),
        };
        for step in 0..config.epoch_len {
            if !tracker.can_sample(config.inner_batch) {
                break 'epochs;
            }
            let batch = tracker.take(sampler, &theta, config.inner_batch, rng)?;
            let outcome = sampler
                .correction(&batch, &theta, &snapshot, config.weight_cap, &mut tracker.stats)
                .and_then(|correction| {
                    let mut v = mu.0.clone();
                    axpy(1.0, &correction, &mut v);
                    let v = GradEstimate::checked(v, "svrg gradient")?;
                    tracker.step(epoch, step, sampler.average_return(&batch), &theta, &v)
                });
            match outcome {
                Ok(next) => theta = next,
                Err(e) if is_numeric_failure(&e) => {
                    tracker.abort(epoch, step, &e);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(tracker.finish(theta, rng))
}

/// θ_{k+1} = P_Θ(θ_k + η ĝ_k) with a fresh batch of N per iteration;
/// `config.epochs` is the iteration count.
pub(crate) fn run_plain_ascent<S: GradientSampler>(
    config: &SrvrPgConfig,
    sampler: &S,
    init: &PolicyParams,
    project_on: bool,
    rng: &mut dyn RngCore,
) -> Result<RunHistory> {
    check_start(config, init, project_on)?;
    let mut tracker = Tracker::new(config, project_on);
    let mut theta = init.clone();
    for iter in 0..config.epochs {
        if !tracker.can_sample(config.snapshot_batch) {
            break;
        }
        let batch = tracker.take(sampler, &theta, config.snapshot_batch, rng)?;
        let outcome = sampler
            .gradient(&batch, &theta)
            .and_then(|g| tracker.step(iter, 0, sampler.average_return(&batch), &theta, &g));
        match outcome {
            Ok(next) => theta = next,
            Err(e) if is_numeric_failure(&e) => {
                tracker.abort(iter, 0, &e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(tracker.finish(theta, rng))
}

fn check_policy_for_weights(config: &SrvrPgConfig) -> Result<()> {
    if config.estimator == EstimatorKind::Reinforce {
        return Err(Error::Config(
            "variance-reduced runs pair g with a weighted GPOMDP term; use estimator = gpomdp or pgt".into(),
        ));
    }
    if config.baseline != Baseline::None {
        return Err(Error::Config(
            "variance-reduced runs do not support a baseline".into(),
        ));
    }
    Ok(())
}

/// Stochastic recursive variance-reduced policy gradient.
pub fn srvr_pg_run<E: Environment + ?Sized>(
    config: &SrvrPgConfig,
    env: &E,
    spec: &PolicySpec,
    init: &PolicyParams,
    rng: &mut dyn RngCore,
) -> Result<RunHistory> {
    spec.check_params(init)?;
    check_policy_for_weights(config)?;
    run_recursive(config, &ActionSampler::new(env, spec, config), init, true, rng)
}

/// Stochastic variance-reduced policy gradient with a fixed per-epoch
/// reference gradient.
pub fn svrpg_run<E: Environment + ?Sized>(
    config: &SrvrPgConfig,
    env: &E,
    spec: &PolicySpec,
    init: &PolicyParams,
    rng: &mut dyn RngCore,
) -> Result<RunHistory> {
    spec.check_params(init)?;
    check_policy_for_weights(config)?;
    run_svrg(config, &ActionSampler::new(env, spec, config), init, true, rng)
}

/// Plain projected stochastic gradient ascent with the configured estimator.
pub fn gpomdp_run<E: Environment + ?Sized>(
    config: &SrvrPgConfig,
    env: &E,
    spec: &PolicySpec,
    init: &PolicyParams,
    rng: &mut dyn RngCore,
) -> Result<RunHistory> {
    spec.check_params(init)?;
    run_plain_ascent(config, &ActionSampler::new(env, spec, config), init, true, rng)
}

