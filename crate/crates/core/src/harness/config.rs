use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimator::EstimatorKind;
use crate::optimizer::OutputRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    Gpomdp,
    Svrpg,
    SrvrPg,
    Pgpe,
    SrvrPgPe,
}

impl Algo {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gpomdp" => Ok(Self::Gpomdp),
            "svrpg" => Ok(Self::Svrpg),
            "srvr-pg" => Ok(Self::SrvrPg),
            "pgpe" => Ok(Self::Pgpe),
            "srvr-pg-pe" => Ok(Self::SrvrPgPe),
            other => Err(Error::Config(format!("unknown algo '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gpomdp => "gpomdp",
            Self::Svrpg => "svrpg",
            Self::SrvrPg => "srvr-pg",
            Self::Pgpe => "pgpe",
            Self::SrvrPgPe => "srvr-pg-pe",
        }
    }

    /// Whether the algorithm has an inner loop (B and m matter).
    pub fn has_inner_loop(self) -> bool {
        matches!(self, Self::Svrpg | Self::SrvrPg | Self::SrvrPgPe)
    }

    pub fn is_parameter_based(self) -> bool {
        matches!(self, Self::Pgpe | Self::SrvrPgPe)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: String,
    pub algo: Algo,
    pub policy: String,
    /// Gaussian action std.
    pub sigma: f64,
    pub gamma: f64,
    pub eta: f64,
    pub n: usize,
    pub b: usize,
    pub m: usize,
    pub budget: usize,
    pub n_seeds: usize,
    pub master_seed: u64,
    /// Seed of the shared initial parameters; every run starts from the
    /// same point.
    pub init_seed: u64,
    pub output: PathBuf,
    pub estimator: EstimatorKind,
    pub hyper_sigma: f64,
    pub optimize_sigma: bool,
    pub horizon: Option<usize>,
    pub weight_cap: Option<f64>,
    pub output_rule: OutputRule,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: "cartpole".into(),
            algo: Algo::SrvrPg,
            policy: "linear".into(),
            sigma: 1.0,
            gamma: 0.99,
            eta: 0.01,
            n: 10,
            b: 5,
            m: 1,
            budget: 1000,
            n_seeds: 1,
            master_seed: 0,
            init_seed: 0,
            output: PathBuf::from("results"),
            estimator: EstimatorKind::Gpomdp,
            hyper_sigma: 1.0,
            optimize_sigma: false,
            horizon: None,
            weight_cap: None,
            output_rule: OutputRule::Last,
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad value '{value}' for '{key}'") })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Parse { line, msg: format!("bad boolean '{value}' for '{key}'") }),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines on top of the defaults. Later keys win.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seed_given = false;
        let mut init_given = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse { line, msg: format!("expected 'key = value', got '{content}'") })?;
            match key {
                "env" => cfg.env = value.to_string(),
                "algo" => cfg.algo = Algo::parse(value).map_err(|e| Error::Parse { line, msg: e.to_string() })?,
                "policy" => cfg.policy = value.to_string(),
                "sigma" => cfg.sigma = parse_num(line, key, value)?,
                "gamma" => cfg.gamma = parse_num(line, key, value)?,
                "eta" => cfg.eta = parse_num(line, key, value)?,
                "N" => cfg.n = parse_num(line, key, value)?,
                "B" => cfg.b = parse_num(line, key, value)?,
                "m" => cfg.m = parse_num(line, key, value)?,
                "budget" => cfg.budget = parse_num::<f64>(line, key, value).and_then(|b| {
                    if b >= 0.0 && b.fract() == 0.0 {
                        Ok(b as usize)
                    } else {
                        Err(Error::Parse { line, msg: format!("budget must be a whole number, got '{value}'") })
                    }
                })?,
                "n_seeds" => cfg.n_seeds = parse_num(line, key, value)?,
                "master_seed" => {
                    cfg.master_seed = parse_num(line, key, value)?;
                    seed_given = true;
                }
                "init_seed" => {
                    cfg.init_seed = parse_num(line, key, value)?;
                    init_given = true;
                }
                "output" => cfg.output = PathBuf::from(value),
                "estimator" => {
                    cfg.estimator = EstimatorKind::parse(value).map_err(|e| Error::Parse { line, msg: e.to_string() })?
                }
                "hyper_sigma" => cfg.hyper_sigma = parse_num(line, key, value)?,
                "optimize_sigma" => cfg.optimize_sigma = parse_bool(line, key, value)?,
                "horizon" => cfg.horizon = Some(parse_num(line, key, value)?),
                "weight_cap" => cfg.weight_cap = Some(parse_num(line, key, value)?),
                "output_rule" => {
                    cfg.output_rule = match value {
                        "last" => OutputRule::Last,
                        "uniform" => OutputRule::Uniform,
                        _ => return Err(Error::Parse { line, msg: format!("bad output_rule '{value}'") }),
                    }
                }
                _ => return Err(Error::Parse { line, msg: format!("unknown key '{key}'") }),
            }
        }
        if seed_given && !init_given {
            cfg.init_seed = cfg.master_seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return fail("N must be >= 1".into());
        }
        if self.algo.has_inner_loop() && (self.b == 0 || self.m == 0) {
            return fail("B and m must be >= 1".into());
        }
        if self.budget < self.n {
            return fail(format!("budget {} is smaller than one snapshot batch N = {}", self.budget, self.n));
        }
        if self.algo.has_inner_loop() && self.b * self.m > self.budget {
            return fail(format!("B·m = {} exceeds the budget {}", self.b * self.m, self.budget));
        }
        if self.n_seeds == 0 {
            return fail("n_seeds must be >= 1".into());
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return fail(format!("eta must be non-negative, got {}", self.eta));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.hyper_sigma > 0.0 && self.hyper_sigma.is_finite()) {
            return fail(format!("hyper_sigma must be positive, got {}", self.hyper_sigma));
        }
        if self.horizon == Some(0) {
            return fail("horizon must be >= 1".into());
        }
        if let Some(cap) = self.weight_cap {
            if !(cap >= 1.0) {
                return fail(format!("weight_cap must be >= 1, got {cap}"));
            }
        }
        Ok(())
    }

    /// Serializes back to the key = value format.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "env = {}\nalgo = {}\npolicy = {}\nsigma = {}\ngamma = {}\neta = {}\nN = {}\nB = {}\nm = {}\nbudget = {}\nn_seeds = {}\nmaster_seed = {}\ninit_seed = {}\noutput = {}\nestimator = {}\nhyper_sigma = {}\noptimize_sigma = {}\noutput_rule = {}\n",
            self.env,
            self.algo,
            self.policy,
            self.sigma,
            self.gamma,
            self.eta,
            self.n,
            self.b,
            self.m,
            self.budget,
            self.n_seeds,
            self.master_seed,
            self.init_seed,
            self.output.display(),
            self.estimator.name(),
            self.hyper_sigma,
            self.optimize_sigma,
            match self.output_rule {
                OutputRule::Last => "last",
                OutputRule::Uniform => "uniform",
            },
        );
        if let Some(h) = self.horizon {
            out.push_str(&format!("horizon = {h}\n"));
        }
        if let Some(c) = self.weight_cap {
            out.push_str(&format!("weight_cap = {c}\n"));
        }
        out
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("cartpole-gpomdp", include_str!("../../presets/cartpole-gpomdp.cfg")),
    ("cartpole-svrpg", include_str!("../../presets/cartpole-svrpg.cfg")),
    ("cartpole-srvrpg", include_str!("../../presets/cartpole-srvrpg.cfg")),
    ("mountaincar-gpomdp", include_str!("../../presets/mountaincar-gpomdp.cfg")),
    ("mountaincar-svrpg", include_str!("../../presets/mountaincar-svrpg.cfg")),
    ("mountaincar-srvrpg", include_str!("../../presets/mountaincar-srvrpg.cfg")),
    ("pendulum-gpomdp", include_str!("../../presets/pendulum-gpomdp.cfg")),
    ("pendulum-svrpg", include_str!("../../presets/pendulum-svrpg.cfg")),
    ("pendulum-srvrpg", include_str!("../../presets/pendulum-srvrpg.cfg")),
    ("cartpole-srvrpgpe", include_str!("../../presets/cartpole-srvrpgpe.cfg")),
    ("mountaincar-srvrpgpe", include_str!("../../presets/mountaincar-srvrpgpe.cfg")),
    ("pendulum-srvrpgpe", include_str!("../../presets/pendulum-srvrpgpe.cfg")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = preset_text(name).ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?;
    ExperimentConfig::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartpole_preset() {
        let c = preset("cartpole-srvrpg").unwrap();
        assert_eq!((c.gamma, c.eta, c.n, c.b, c.m, c.budget), (0.995, 0.005, 25, 5, 3, 2500));
        assert_eq!(c.algo, Algo::SrvrPg);
        assert_eq!(c.policy, "mlp64");
    }

    #[test]
    fn pendulum_preset() {
        let c = preset("pendulum-srvrpg").unwrap();
        assert_eq!((c.n, c.b, c.m, c.eta, c.gamma, c.budget), (250, 50, 1, 0.01, 0.995, 200_000));
    }

    #[test]
    fn all_presets_parse() {
        for name in preset_names() {
            preset(name).unwrap();
        }
    }

    #[test]
    fn round_trip() {
        let mut c = preset("pendulum-svrpg").unwrap();
        c.weight_cap = Some(50.0);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn errors_carry_lines() {
        let err = ExperimentConfig::parse("env = cartpole\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = ExperimentConfig::parse("N = ten").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn infeasible_configs_rejected() {
        assert!(ExperimentConfig::parse("N = 10\nbudget = 5").is_err());
        assert!(ExperimentConfig::parse("N = 10\nB = 40\nm = 3\nbudget = 100").is_err());
        assert!(ExperimentConfig::parse("n_seeds = 0").is_err());
    }

    #[test]
    fn master_seed_fixes_init_seed() {
        let c = ExperimentConfig::parse("master_seed = 9").unwrap();
        assert_eq!(c.init_seed, 9);
        let c = ExperimentConfig::parse("master_seed = 9\ninit_seed = 2").unwrap();
        assert_eq!(c.init_seed, 2);
    }
}
