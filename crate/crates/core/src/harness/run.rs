use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Algo, ExperimentConfig};
use super::report::{aggregate, write_report, CsvReport, RawRow, RunSummary};
use crate::error::{Error, Result};
use crate::estimator::Baseline;
use crate::mdp::{make_env, Environment, TabularMdp};
use crate::optimizer::{gpomdp_run, srvr_pg_run, svrpg_run, ConstraintSet, RunHistory, SrvrPgConfig};
use crate::pgpe::{pgpe_run, srvr_pg_pe_run, HyperParams};
use crate::policy::PolicySpec;
use crate::vector::PolicyParams;

/// Environment, policy and shared initial point for one config.
pub struct Setup {
    pub env: Box<dyn Environment>,
    pub spec: PolicySpec,
    pub init: PolicyParams,
    pub optimizer: SrvrPgConfig,
}

pub fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let env = make_env(&cfg.env, cfg.horizon)?;
    let tabular = match cfg.env.strip_prefix("tabular:") {
        Some(path) => {
            let mdp = TabularMdp::load(path)?;
            Some((mdp.n_states, mdp.n_actions))
        }
        None => None,
    };
    let spec = PolicySpec::from_name(&cfg.policy, env.obs_dim(), cfg.sigma, tabular)?;
    let init = spec.init_params(&mut ChaCha8Rng::seed_from_u64(cfg.init_seed));
    let epochs = match cfg.algo {
        Algo::Gpomdp | Algo::Pgpe => cfg.budget / cfg.n,
        _ => cfg.budget.div_ceil(cfg.n + (cfg.m - 1) * cfg.b),
    };
    let (epoch_len, inner_batch) = if cfg.algo.has_inner_loop() { (cfg.m, cfg.b) } else { (1, 1) };
    let optimizer = SrvrPgConfig {
        epochs: epochs.max(1),
        epoch_len,
        step_size: cfg.eta,
        snapshot_batch: cfg.n,
        inner_batch,
        gamma: cfg.gamma,
        horizon: env.horizon(),
        constraint: ConstraintSet::Unconstrained,
        estimator: cfg.estimator,
        baseline: Baseline::None,
        output_rule: cfg.output_rule,
        weight_cap: cfg.weight_cap,
        trajectory_budget: Some(cfg.budget),
    };
    Ok(Setup { env, spec, init, optimizer })
}

/// Per-run seeds, derived in order from the master seed.
pub fn derive_seeds(master_seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// One run of the configured algorithm from the shared initial point.
pub fn run_seed(cfg: &ExperimentConfig, setup: &Setup, seed: u64) -> Result<RunHistory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = setup.env.as_ref();
    let oc = &setup.optimizer;
    match cfg.algo {
        Algo::Gpomdp => gpomdp_run(oc, env, &setup.spec, &setup.init, &mut rng),
        Algo::Svrpg => svrpg_run(oc, env, &setup.spec, &setup.init, &mut rng),
        Algo::SrvrPg => srvr_pg_run(oc, env, &setup.spec, &setup.init, &mut rng),
        Algo::Pgpe | Algo::SrvrPgPe => {
            let hyper = HyperParams::new(setup.init.0.clone(), cfg.hyper_sigma, cfg.optimize_sigma)?;
            if cfg.algo == Algo::Pgpe {
                pgpe_run(oc, env, &setup.spec, &hyper, &mut rng)
            } else {
                srvr_pg_pe_run(oc, env, &setup.spec, &hyper, &mut rng)
            }
        }
    }
}

/// Runs all seeds (concurrently) and builds the report without touching
/// the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<CsvReport> {
    let setup = setup(cfg)?;
    let seeds = derive_seeds(cfg.master_seed, cfg.n_seeds);
    let histories = seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &setup, seed))
        .collect::<Result<Vec<_>>>()?;
    let b = if cfg.algo.has_inner_loop() { cfg.b } else { 0 };
    let mut raw = Vec::new();
    let mut runs = Vec::new();
    for (&seed, h) in seeds.iter().zip(&histories) {
        if let Some(a) = &h.aborted {
            log::warn!("seed {seed} truncated at epoch {}, step {}: {}", a.epoch, a.step, a.reason);
        }
        raw.extend(h.records.iter().map(|r| RawRow {
            algo: cfg.algo.name().to_string(),
            env: cfg.env.clone(),
            seed,
            b,
            epoch: r.epoch,
            step: r.step,
            trajectories: r.trajectories,
            avg_return: r.avg_return,
            update_norm: r.update_norm,
        }));
        runs.push(RunSummary::from_history(seed, h));
    }
    let aggregate = aggregate(&raw, cfg.budget);
    Ok(CsvReport { raw, aggregate, runs })
}

/// Runs the experiment and writes `raw.csv`, `aggregate.csv` and
/// `runs.csv` into `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<CsvReport> {
    let report = execute(cfg)?;
    write_report(&report, &cfg.output)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    B,
    Eta,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "B" => Ok(Self::B),
            "eta" => Ok(Self::Eta),
            other => Err(Error::Config(format!("cannot sweep over '{other}' (expected B or eta)"))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::B => "B",
            Self::Eta => "eta",
        }
    }
}

/// Configs for each sweep point, all validated before anything runs.
pub fn sweep_configs(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<ExperimentConfig>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            match param {
                SweepParam::B => {
                    if !(v >= 1.0 && v.fract() == 0.0) {
                        return Err(Error::Config(format!("B must be a positive integer, got {v}")));
                    }
                    c.b = v as usize;
                }
                SweepParam::Eta => c.eta = v,
            }
            c.output = cfg.output.join(format!("{}={v}", param.label()));
            c.validate()?;
            Ok(c)
        })
        .collect()
}

/// One experiment per value with everything else fixed. Each point is
/// written to its own subdirectory and the merged CSVs go to `cfg.output`.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<CsvReport> {
    let configs = sweep_configs(cfg, param, values)?;
    let mut merged = CsvReport::default();
    for c in &configs {
        let report = run_experiment(c)?;
        merged.raw.extend(report.raw);
        merged.aggregate.extend(report.aggregate);
        merged.runs.extend(report.runs);
    }
    write_report(&merged, &cfg.output)?;
    Ok(merged)
}

/// Batch-size sensitivity sweep.
pub fn sweep_batch_size(cfg: &ExperimentConfig, b_values: &[usize]) -> Result<CsvReport> {
    let values: Vec<f64> = b_values.iter().map(|&b| b as f64).collect();
    sweep(cfg, SweepParam::B, &values)
}

pub fn load_and_run(path: &Path) -> Result<CsvReport> {
    run_experiment(&ExperimentConfig::load(path)?)
}
