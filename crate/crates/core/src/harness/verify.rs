//! The acceptance checks as library functions, shared by the `verify`
//! subcommand and the acceptance test target.

use std::fmt;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{preset, ExperimentConfig};
use super::run::{derive_seeds, run_seed, setup};
use crate::error::Result;
use crate::estimator::{gpomdp_grad, pgt_grad, prefix_log_weights, weighted_gpomdp_grad, Baseline, EstimatorKind, WeightStats};
use crate::mdp::{rollout, CartPole, CountingEnv, LinearBandit, TabularMdp};
use crate::optimizer::{
    gradient_mapping, project, recommended_batches, srvr_pg_run, variance_bound_gaussian, ActionSampler,
    BatchConstants, BatchSchedule, ConstraintSet, GradientSampler, SrvrPgConfig,
};
use crate::oracle::{
    default_oracle_mdp, default_oracle_policy, finite_diff_gradient, TrajectorySpace, DEFAULT_FD_STEP,
    DEFAULT_ORACLE_GAMMA,
};
use crate::pgpe::{hyper_score, log_density, HyperParams, ParamSampler};
use crate::policy::PolicySpec;
use crate::vector::{axpy, max_abs_diff, max_rel_err, norm, GradEstimate, PolicyParams};

const VERIFY_SEED: u64 = 7_2019;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {:<28} ({:.1}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn timed(id: usize, name: &'static str, check: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn gaussian_vec(d: usize, scale: f64, rng: &mut dyn RngCore) -> PolicyParams {
    PolicyParams((0..d).map(|_| { let z: f64 = StandardNormal.sample(rng); scale * z }).collect::<Vec<f64>>())
}

/// PGT and GPOMDP (no baseline) agree on random trajectories from random
/// tabular MDPs.
pub fn estimator_equivalence() -> CheckOutcome {
    timed(1, "estimator equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
        let mut worst = 0.0f64;
        let n_traj = 1000;
        for _ in 0..n_traj / 50 {
            let ns = rng.random_range(2..=5);
            let na = rng.random_range(2..=4);
            let h = rng.random_range(1..=12);
            let mdp = TabularMdp::random(ns, na, h, 1.0, &mut rng);
            let spec = PolicySpec::softmax(ns, na);
            let theta = gaussian_vec(spec.dim(), 1.0, &mut rng);
            let gamma = rng.random_range(0.5..1.0);
            for _ in 0..50 {
                let t = rollout(&mdp, &spec, &theta, h, &mut rng)?;
                let a = pgt_grad(&t, &spec, &theta, gamma, &Baseline::None)?;
                let b = gpomdp_grad(&t, &spec, &theta, gamma, &Baseline::None)?;
                worst = worst.max(max_abs_diff(&a, &b));
            }
        }
        Ok((worst <= 1e-10, format!("{n_traj} trajectories, max |pgt - gpomdp| = {worst:.2e} (tol 1e-10)")))
    })
}

/// Enumeration expectations of all three estimators equal the exact
/// gradient, which itself matches the independent product-rule form.
pub fn unbiasedness() -> CheckOutcome {
    timed(2, "unbiasedness", || {
        let mdp = default_oracle_mdp();
        let spec = default_oracle_policy();
        let space = TrajectorySpace::new(&mdp)?;
        let gamma = DEFAULT_ORACLE_GAMMA;
        let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED + 2);
        let mut worst = 0.0f64;
        let mut worst_oracle = 0.0f64;
        for _ in 0..20 {
            let theta = gaussian_vec(spec.dim(), 1.0, &mut rng);
            let exact = space.gradient(&spec, &theta, gamma)?;
            let product = space.gradient_by_product_rule(&spec, &theta, gamma)?;
            worst_oracle = worst_oracle.max(max_abs_diff(&exact, &product));
            for kind in [EstimatorKind::Reinforce, EstimatorKind::Pgt, EstimatorKind::Gpomdp] {
                let mean = space.moments(&spec, &theta, kind, gamma)?.mean;
                worst = worst.max(max_abs_diff(&mean, &exact));
            }
        }
        Ok((
            worst <= 1e-12 && worst_oracle <= 1e-12,
            format!("20 θ, max |E[g] - ∇J| = {worst:.2e}, score vs product-rule oracle {worst_oracle:.2e} (tol 1e-12)"),
        ))
    })
}

/// E_{θ1}[weighted GPOMDP toward θ2] = E_{θ2}[GPOMDP] and E_{θ1}[ω_{0:h}] = 1.
pub fn change_of_measure() -> CheckOutcome {
    timed(3, "change of measure", || {
        let mdp = default_oracle_mdp();
        let spec = default_oracle_policy();
        let space = TrajectorySpace::new(&mdp)?;
        let gamma = DEFAULT_ORACLE_GAMMA;
        let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED + 3);
        let (mut worst_grad, mut worst_weight) = (0.0f64, 0.0f64);
        for _ in 0..20 {
            let behavior = gaussian_vec(spec.dim(), 1.0, &mut rng);
            let target = gaussian_vec(spec.dim(), 1.0, &mut rng);
            let weighted = space.expectation(&spec, &behavior, |t| {
                weighted_gpomdp_grad(t, &spec, &target, &behavior, gamma).map(GradEstimate::into_inner)
            })?;
            let direct = space.expectation(&spec, &target, |t| {
                gpomdp_grad(t, &spec, &target, gamma, &Baseline::None).map(GradEstimate::into_inner)
            })?;
            worst_grad = worst_grad.max(max_abs_diff(&weighted, &direct));
            let weights = space.expectation(&spec, &behavior, |t| {
                Ok(prefix_log_weights(t, &spec, &target, &behavior)?.into_iter().map(f64::exp).collect())
            })?;
            worst_weight = worst_weight.max(weights.iter().map(|w| (w - 1.0).abs()).fold(0.0, f64::max));
        }
        Ok((
            worst_grad <= 1e-12 && worst_weight <= 1e-12,
            format!("20 pairs, gradient gap {worst_grad:.2e}, max |E[ω_0:h] - 1| = {worst_weight:.2e} (tol 1e-12)"),
        ))
    })
}

/// Exact gradient against finite differences of exact J, and score
/// functions against finite differences of log π.
pub fn gradient_correctness() -> CheckOutcome {
    timed(4, "gradient correctness", || {
        let mdp = default_oracle_mdp();
        let spec = default_oracle_policy();
        let space = TrajectorySpace::new(&mdp)?;
        let gamma = DEFAULT_ORACLE_GAMMA;
        let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED + 4);
        let mut worst_j = 0.0f64;
        for _ in 0..10 {
            let theta = gaussian_vec(spec.dim(), 1.0, &mut rng);
            let exact = space.gradient(&spec, &theta, gamma)?;
            let fd = finite_diff_gradient(|p| space.performance(&spec, p, gamma), &theta, DEFAULT_FD_STEP)?;
            worst_j = worst_j.max(max_rel_err(&exact, &fd));
        }
        let specs = [
            PolicySpec::linear(3, 0.7),
            PolicySpec::mlp(3, vec![6, 4], 1.3),
            PolicySpec::softmax(3, 4),
        ];
        let mut worst_score = 0.0f64;
        for spec in &specs {
            for _ in 0..100 {
                let theta = gaussian_vec(spec.dim(), 0.5, &mut rng);
                let (obs, action) = match spec {
                    PolicySpec::Softmax { n_states, n_actions } => (
                        vec![rng.random_range(0..*n_states) as f64],
                        rng.random_range(0..*n_actions) as f64,
                    ),
                    _ => (gaussian_vec(3, 1.0, &mut rng).0, StandardNormal.sample(&mut rng)),
                };
                let score = spec.score(&theta, &obs, action)?;
                let fd = finite_diff_gradient(|p| spec.log_prob(p, &obs, action), &theta, DEFAULT_FD_STEP)?;
                worst_score = worst_score.max(max_rel_err(&score, &fd));
            }
        }
        Ok((
            worst_j <= 1e-6 && worst_score <= 1e-5,
            format!("∇J vs FD rel err {worst_j:.2e} (tol 1e-6), score vs FD rel err {worst_score:.2e} over 300 probes (tol 1e-5)"),
        ))
    })
}

/// Gradient mapping identity, ball projection, and feasibility of every
/// SRVR-PG iterate under a ball constraint.
pub fn mapping_and_projection() -> CheckOutcome {
    timed(5, "mapping and projection", || {
        let theta = PolicyParams(vec![0.3, -1.7, 2.5]);
        let grad = GradEstimate(vec![1e-300, -4.25, 7.0 / 3.0]);
        let mapped = gradient_mapping(&theta, &grad, 0.1, &ConstraintSet::Unconstrained)?;
        let bitwise = mapped.iter().zip(grad.iter()).all(|(a, b)| a.to_bits() == b.to_bits());

        let ball = ConstraintSet::ball(vec![0.0, 0.0], 5.0)?;
        let p = project(&PolicyParams(vec![6.0, 8.0]), &ball)?;
        let proj_err = max_abs_diff(&p, &[3.0, 4.0]);

        // each prefix of the trajectory budget reproduces one iterate
        let mdp = default_oracle_mdp();
        let spec = default_oracle_policy();
        let radius = 0.5;
        let constraint = ConstraintSet::ball(vec![0.0; spec.dim()], radius)?;
        let base = SrvrPgConfig {
            epochs: 3,
            epoch_len: 4,
            step_size: 2.0,
            snapshot_batch: 20,
            inner_batch: 5,
            gamma: DEFAULT_ORACLE_GAMMA,
            horizon: mdp.horizon,
            constraint: constraint.clone(),
            ..Default::default()
        };
        let init = PolicyParams::zeros(spec.dim());
        let mut max_norm = 0.0f64;
        let mut iterates = 0;
        let mut boundary_hits = 0;
        let full = base.srvr_episodes();
        let mut budget = 0;
        while budget < full {
            budget += if budget % (20 + 3 * 5) == 0 { 20 } else { 5 };
            let cfg = SrvrPgConfig { trajectory_budget: Some(budget), ..base.clone() };
            let h = srvr_pg_run(&cfg, &mdp, &spec, &init, &mut ChaCha8Rng::seed_from_u64(VERIFY_SEED + 5))?;
            let n = norm(&h.final_params);
            max_norm = max_norm.max(n);
            boundary_hits += usize::from(n > radius - 1e-9);
            iterates += 1;
        }
        let feasible = max_norm <= radius + 1e-12;
        Ok((
            bitwise && proj_err <= 1e-12 && feasible,
            format!(
                "bitwise identity {bitwise}, projection err {proj_err:.1e}, {iterates} iterates max ‖θ‖ = {max_norm:.6} ≤ {radius} ({boundary_hits} on boundary)"
            ),
        ))
    })
}

/// Environment reset counter over a full SRVR-PG run.
pub fn trajectory_accounting() -> CheckOutcome {
    timed(6, "trajectory accounting", || {
        let env = CountingEnv::new(CartPole::new(100));
        let spec = PolicySpec::linear(4, 1.0);
        let cfg = SrvrPgConfig {
            epochs: 4,
            epoch_len: 5,
            snapshot_batch: 100,
            inner_batch: 10,
            step_size: 0.001,
            gamma: 0.99,
            horizon: 100,
            ..Default::default()
        };
        let init = spec.init_params(&mut ChaCha8Rng::seed_from_u64(1));
        let h = srvr_pg_run(&cfg, &env, &spec, &init, &mut ChaCha8Rng::seed_from_u64(VERIFY_SEED + 6))?;
        let expected = 4 * 100 + 4 * 4 * 10;
        Ok((
            env.episodes() == expected && h.total_trajectories == expected && h.records.len() == 20,
            format!("counter {} reported {} expected {expected}, {} updates", env.episodes(), h.total_trajectories, h.records.len()),
        ))
    })
}

fn variance_trace(samples: &[Vec<f64>]) -> f64 {
    let n = samples.len() as f64;
    let d = samples[0].len();
    (0..d)
        .map(|i| {
            let mean = samples.iter().map(|s| s[i]).sum::<f64>() / n;
            samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum()
}

/// Ratio of the empirical variance trace of the one-step recursive
/// estimator to that of a plain batch of the same inner size. Returns
/// (ratio, recursive trace, plain trace).
pub fn variance_reduction_ratio(replications: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let mdp = default_oracle_mdp();
    let spec = default_oracle_policy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snapshot = gaussian_vec(spec.dim(), 0.5, &mut rng);
    let dir = gaussian_vec(spec.dim(), 1.0, &mut rng);
    let mut current = snapshot.clone();
    axpy(0.05 / norm(&dir), &dir, &mut current);
    let cfg = SrvrPgConfig { gamma: DEFAULT_ORACLE_GAMMA, horizon: mdp.horizon, ..Default::default() };
    let sampler = ActionSampler::new(&mdp, &spec, &cfg);
    let (n, b) = (100, 10);
    let mut recursive = Vec::with_capacity(replications);
    let mut plain = Vec::with_capacity(replications);
    for _ in 0..replications {
        let big = sampler.sample(&snapshot, n, &mut rng)?;
        let mut v = sampler.gradient(&big, &snapshot)?.into_inner();
        let small = sampler.sample(&current, b, &mut rng)?;
        let mut stats = WeightStats::default();
        axpy(1.0, &sampler.correction(&small, &current, &snapshot, None, &mut stats)?, &mut v);
        recursive.push(v);
        let fresh = sampler.sample(&current, b, &mut rng)?;
        plain.push(sampler.gradient(&fresh, &current)?.into_inner());
    }
    let (vr, vp) = (variance_trace(&recursive), variance_trace(&plain));
    Ok((vr / vp, vr, vp))
}

pub const VARIANCE_RATIO_THRESHOLD: f64 = 0.5;

pub fn variance_reduction() -> CheckOutcome {
    timed(7, "variance reduction", || {
        let (ratio, vr, vp) = variance_reduction_ratio(1000, VERIFY_SEED + 7)?;
        Ok((
            ratio <= VARIANCE_RATIO_THRESHOLD,
            format!("tr Var[v_1] = {vr:.4e}, tr Var[plain B=10] = {vp:.4e}, ratio {ratio:.4} (≤ {VARIANCE_RATIO_THRESHOLD})"),
        ))
    })
}

pub fn batch_schedules() -> CheckOutcome {
    timed(8, "batch schedule shapes", || {
        let plain = recommended_batches(0.01, &BatchConstants::default())?;
        let disc = recommended_batches(0.01, &BatchConstants { gamma: Some(0.9), ..Default::default() })?;
        let ok = plain == BatchSchedule { n: 100, b: 10, m: 10, s: 10 }
            && plain.b * plain.m == plain.n
            && disc.n == plain.n * 1000
            && disc.b == plain.b * 10
            && disc.m == plain.m * 100;
        Ok((ok, format!("ε=0.01: {plain:?}; γ=0.9: N={} B={} m={}", disc.n, disc.b, disc.m)))
    })
}

/// Per-seed outcome of a learning comparison.
#[derive(Debug, Clone)]
pub struct LearningSeed {
    pub seed: u64,
    pub reached: Option<usize>,
    pub baseline_reached: Option<usize>,
}

impl LearningSeed {
    /// Reached the threshold within budget, and no later than the baseline.
    pub fn success(&self) -> bool {
        match (self.reached, self.baseline_reached) {
            (Some(t), Some(tb)) => t <= tb,
            (Some(_), None) => true,
            (None, _) => false,
        }
    }
}

/// Trajectories at which each seed's learning curve first reaches
/// `threshold`, for `cfg` run from its shared initial point.
pub fn trajectories_to_threshold(cfg: &ExperimentConfig, threshold: f64) -> Result<Vec<(u64, Option<usize>)>> {
    use rayon::prelude::*;
    let s = setup(cfg)?;
    derive_seeds(cfg.master_seed, cfg.n_seeds)
        .into_par_iter()
        .map(|seed| {
            let h = run_seed(cfg, &s, seed)?;
            Ok((seed, h.trajectories_to_reach(threshold)))
        })
        .collect()
}

/// Settings for the desk-scale CartPole comparison.
#[derive(Debug, Clone)]
pub struct LearningSettings {
    pub n_seeds: usize,
    pub master_seed: u64,
    /// Fraction of the horizon-maximal return counted as the plateau.
    pub plateau_fraction: f64,
    pub required_successes: usize,
    /// Action-noise override; the presets leave σ at the config default.
    pub sigma: Option<f64>,
    /// Hyper-distribution std override for the parameter-based run.
    pub hyper_sigma: Option<f64>,
}

impl Default for LearningSettings {
    fn default() -> Self {
        Self { n_seeds: 10, master_seed: 2019, plateau_fraction: 0.9, required_successes: 8, sigma: None, hyper_sigma: None }
    }
}

fn seeded_preset(name: &str, settings: &LearningSettings) -> Result<ExperimentConfig> {
    let mut cfg = preset(name)?;
    cfg.n_seeds = settings.n_seeds;
    cfg.master_seed = settings.master_seed;
    cfg.init_seed = settings.master_seed;
    if let Some(sigma) = settings.sigma {
        cfg.sigma = sigma;
    }
    if let Some(h) = settings.hyper_sigma {
        cfg.hyper_sigma = h;
    }
    Ok(cfg)
}

pub fn cartpole_learning(settings: &LearningSettings) -> Result<Vec<LearningSeed>> {
    let srvr = seeded_preset("cartpole-srvrpg", settings)?;
    let gpomdp = seeded_preset("cartpole-gpomdp", settings)?;
    let threshold = settings.plateau_fraction * srvr.horizon.unwrap_or(CartPole::DEFAULT_HORIZON) as f64;
    let a = trajectories_to_threshold(&srvr, threshold)?;
    let b = trajectories_to_threshold(&gpomdp, threshold)?;
    Ok(a.into_iter()
        .zip(b)
        .map(|((seed, reached), (_, baseline_reached))| LearningSeed { seed, reached, baseline_reached })
        .collect())
}

fn describe(seeds: &[LearningSeed]) -> String {
    seeds
        .iter()
        .map(|s| {
            let f = |x: Option<usize>| x.map_or("-".to_string(), |t| t.to_string());
            format!("{}/{}", f(s.reached), f(s.baseline_reached))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn desk_scale_learning(settings: &LearningSettings) -> CheckOutcome {
    timed(9, "desk-scale learning", || {
        let seeds = cartpole_learning(settings)?;
        let wins = seeds.iter().filter(|s| s.success()).count();
        Ok((
            wins >= settings.required_successes,
            format!(
                "{wins}/{} seeds reach {:.0}% of max no later than GPOMDP [srvr/gpomdp: {}]",
                seeds.len(),
                100.0 * settings.plateau_fraction,
                describe(&seeds)
            ),
        ))
    })
}

/// Hyper-score against finite differences and exactness of the recursion
/// at equal hyper-parameters.
pub fn pgpe_exact() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED + 10);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let hyper = HyperParams {
            mu: gaussian_vec(5, 1.0, &mut rng).0,
            log_std: gaussian_vec(5, 0.3, &mut rng).0,
            learn_std: true,
        };
        let theta = sample_theta(&hyper, &mut rng);
        let score = hyper_score(&hyper, &theta)?;
        let fd = finite_diff_gradient(
            |v| log_density(&hyper.with_vector(v)?, &theta),
            &hyper.to_vector(),
            DEFAULT_FD_STEP,
        )?;
        worst = worst.max(max_rel_err(&score, &fd));
    }

    let env = CartPole::new(100);
    let spec = PolicySpec::linear(4, 1.0);
    let hyper = HyperParams::new(spec.init_params(&mut rng).0, 0.5, true)?;
    let sampler = ParamSampler { env: &env, spec: &spec, template: hyper.clone(), gamma: 0.99, horizon: 100 };
    let rho = hyper.to_vector();
    let batch = sampler.sample(&rho, 20, &mut rng)?;
    let v_prev = sampler.gradient(&batch, &rho)?;
    let mut v = v_prev.0.clone();
    let mut stats = WeightStats::default();
    axpy(1.0, &sampler.correction(&batch, &rho, &rho, None, &mut stats)?, &mut v);
    let unchanged = v.iter().zip(v_prev.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
    Ok((
        worst <= 1e-6 && unchanged,
        format!("hyper-score FD rel err {worst:.2e} (tol 1e-6), v_t unchanged {unchanged}"),
    ))
}

/// Desk-scale CartPole SRVR-PG-PE from the shipped preset.
pub fn pgpe_learning(settings: &LearningSettings) -> Result<(bool, String)> {
    let cfg = seeded_preset("cartpole-srvrpgpe", settings)?;
    let threshold = settings.plateau_fraction * cfg.horizon.unwrap_or(CartPole::DEFAULT_HORIZON) as f64;
    let reached = trajectories_to_threshold(&cfg, threshold)?;
    let wins = reached.iter().filter(|(_, r)| r.is_some()).count();
    let list = reached
        .iter()
        .map(|(_, r)| r.map_or("-".to_string(), |t| t.to_string()))
        .collect::<Vec<_>>()
        .join(" ");
    Ok((
        wins >= settings.required_successes,
        format!("{wins}/{} seeds reach {threshold} within {} [{list}]", reached.len(), cfg.budget),
    ))
}

pub fn pgpe_suite(settings: &LearningSettings) -> CheckOutcome {
    timed(10, "pgpe suite", || {
        let (exact_ok, exact) = pgpe_exact()?;
        let (learn_ok, learn) = pgpe_learning(settings)?;
        Ok((exact_ok && learn_ok, format!("{exact}; {learn}")))
    })
}

fn sample_theta(hyper: &HyperParams, rng: &mut dyn RngCore) -> Vec<f64> {
    crate::pgpe::sample_policy_params(hyper, rng).into_inner()
}

/// Empirical PGT variance on a bounded-feature bandit against the
/// closed-form bound. Returns (variance, standard error, bound).
pub fn pgt_variance_vs_bound(samples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let obs = vec![0.6];
    let (r, h, gamma, sigma) = (1.0, 5, 0.9, 1.0);
    let env = LinearBandit::new(obs.clone(), r, h);
    let spec = PolicySpec::linear(1, sigma);
    let theta = PolicyParams(vec![0.4, -0.2]);
    let m_phi = (obs[0] * obs[0] + 1.0f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grads = (0..samples)
        .map(|_| {
            let t = rollout(&env, &spec, &theta, h, &mut rng)?;
            pgt_grad(&t, &spec, &theta, gamma, &Baseline::None).map(GradEstimate::into_inner)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = samples as f64;
    let d = spec.dim();
    let mean: Vec<f64> = (0..d).map(|i| grads.iter().map(|g| g[i]).sum::<f64>() / n).collect();
    let sq: Vec<f64> = grads
        .iter()
        .map(|g| g.iter().zip(&mean).map(|(a, m)| (a - m).powi(2)).sum::<f64>())
        .collect();
    let var = sq.iter().sum::<f64>() / (n - 1.0);
    let sd = (sq.iter().map(|s| (s - var).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let bound = variance_bound_gaussian(r, m_phi, sigma, gamma, h)?;
    Ok((var, sd / n.sqrt(), bound))
}

pub fn variance_bound() -> CheckOutcome {
    timed(11, "variance bound", || {
        let (var, se, bound) = pgt_variance_vs_bound(1000, VERIFY_SEED + 11)?;
        Ok((
            var - 3.0 * se <= bound,
            format!("empirical tr Var = {var:.4} ± {se:.4}, bound ξ² = {bound:.4}"),
        ))
    })
}

/// The exact and fast statistical checks (1–8, 11).
pub fn fast_checks() -> Vec<CheckOutcome> {
    vec![
        estimator_equivalence(),
        unbiasedness(),
        change_of_measure(),
        gradient_correctness(),
        mapping_and_projection(),
        trajectory_accounting(),
        variance_reduction(),
        batch_schedules(),
        variance_bound(),
    ]
}

pub fn all_checks(include_learning: bool) -> Vec<CheckOutcome> {
    let mut out = fast_checks();
    if include_learning {
        let settings = LearningSettings::default();
        out.insert(8, desk_scale_learning(&settings));
        out.insert(9, pgpe_suite(&settings));
    }
    out
}

