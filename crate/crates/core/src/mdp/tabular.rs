use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngCore};

use super::{check_action, check_step, EnvState, Environment, StepOutcome, Trajectory};
use crate::error::{Error, Result};

/// Upper bound on the number of trajectories `enumerate_trajectories` will produce.
pub const MAX_ENUMERATION_LEAVES: usize = 1_000_000;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite MDP with explicit tables. States and actions are indices; the
/// observation of state `s` is `[s as f64]` and an action is the action
/// index as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub initial_dist: Vec<f64>,
    /// Row `s * n_actions + a` holds P(·|s, a).
    pub transition: Vec<Vec<f64>>,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<f64>>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidInput(format!("{what} has negative or non-finite entries")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidInput(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        initial_dist: Vec<f64>,
        transition: Vec<Vec<f64>>,
        reward: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidInput("tabular MDP needs at least one state and action".into()));
        }
        if initial_dist.len() != n_states {
            return Err(Error::InvalidInput("initial distribution length != n_states".into()));
        }
        check_distribution(&initial_dist, "initial distribution")?;
        if transition.len() != n_states * n_actions {
            return Err(Error::InvalidInput(format!(
                "expected {} transition rows, got {}",
                n_states * n_actions,
                transition.len()
            )));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n_states {
                return Err(Error::InvalidInput(format!("transition row {i} has wrong length")));
            }
            check_distribution(row, &format!("transition row {i}"))?;
        }
        if reward.len() != n_states || reward.iter().any(|r| r.len() != n_actions) {
            return Err(Error::InvalidInput("reward table must be n_states x n_actions".into()));
        }
        if reward.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput("reward table has non-finite entries".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            horizon,
            initial_dist,
            transition,
            reward,
        })
    }

    /// Random instance: Dirichlet(1)-like rows from normalised uniforms and
    /// rewards uniform in `[-reward_bound, reward_bound]`.
    pub fn random(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        reward_bound: f64,
        rng: &mut dyn RngCore,
    ) -> Self {
        let mut simplex = |n: usize| -> Vec<f64> {
            let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = raw.iter().sum();
            let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            // absorb rounding in the last entry so rows sum to 1 to machine precision
            let head: f64 = p[..n - 1].iter().sum();
            p[n - 1] = 1.0 - head;
            p
        };
        let initial_dist = simplex(n_states);
        let transition = (0..n_states * n_actions).map(|_| simplex(n_states)).collect();
        let reward = (0..n_states)
            .map(|_| {
                (0..n_actions)
                    .map(|_| rng.random_range(-reward_bound..=reward_bound))
                    .collect()
            })
            .collect();
        Self::new(n_states, n_actions, horizon, initial_dist, transition, reward)
            .expect("random tables are valid")
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        &self.transition[state * self.n_actions + action]
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.reward.iter().flatten().fold(0.0, |m, r| f64::max(m, r.abs()))
    }

    fn action_index(&self, action: f64) -> Result<usize> {
        check_action(action)?;
        let idx = action.round();
        if (action - idx).abs() > 1e-9 || idx < 0.0 || idx as usize >= self.n_actions {
            return Err(Error::InvalidInput(format!(
                "action {action} is not an index in 0..{}",
                self.n_actions
            )));
        }
        Ok(idx as usize)
    }

    /// Parses the plain-text format: `n_states n_actions horizon`, the
    /// initial distribution, `n_states·n_actions` transition rows, then the
    /// reward table. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let mut next_row = |expected: usize| -> Result<(usize, Vec<f64>)> {
            let (line, content) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: "unexpected end of file".into(),
            })?;
            let row = content
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?;
            if row.len() != expected {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {expected} values, found {}", row.len()),
                });
            }
            Ok((line, row))
        };

        let (line, header) = next_row(3)?;
        if header.iter().any(|x| *x < 0.0 || x.fract() != 0.0) {
            return Err(Error::Parse {
                line,
                msg: "header must be three non-negative integers".into(),
            });
        }
        let (n_states, n_actions, horizon) =
            (header[0] as usize, header[1] as usize, header[2] as usize);
        let (_, initial_dist) = next_row(n_states)?;
        let transition = (0..n_states * n_actions)
            .map(|_| next_row(n_states).map(|(_, r)| r))
            .collect::<Result<Vec<_>>>()?;
        let reward = (0..n_states)
            .map(|_| next_row(n_actions).map(|(_, r)| r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_states, n_actions, horizon, initial_dist, transition, reward)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let row = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        writeln!(out, "{} {} {}", self.n_states, self.n_actions, self.horizon).unwrap();
        writeln!(out, "{}", row(&self.initial_dist)).unwrap();
        for r in &self.transition {
            writeln!(out, "{}", row(r)).unwrap();
        }
        for r in &self.reward {
            writeln!(out, "{}", row(r)).unwrap();
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn sample_index(p: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // rounding: fall back to the last index with positive mass
    p.iter().rposition(|x| *x > 0.0).unwrap_or(p.len() - 1)
}

impl Environment for TabularMdp {
    fn name(&self) -> &str {
        "tabular"
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reward_bound(&self) -> f64 {
        self.max_abs_reward()
    }

    fn action_bound(&self) -> f64 {
        (self.n_actions - 1) as f64
    }

    fn reset(&self, rng: &mut dyn RngCore) -> EnvState {
        EnvState {
            values: vec![sample_index(&self.initial_dist, rng) as f64],
            step_index: 0,
        }
    }

    fn step(&self, state: &EnvState, action: f64, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        check_step(state, self.horizon)?;
        let a = self.action_index(action)?;
        let s = state.values[0] as usize;
        let next = sample_index(self.transition_row(s, a), rng);
        let step_index = state.step_index + 1;
        Ok(StepOutcome {
            state: EnvState {
                values: vec![next as f64],
                step_index,
            },
            reward: self.reward[s][a],
            done: step_index >= self.horizon,
        })
    }
}

/// Every length-`horizon` trajectory of `mdp` paired with its
/// environment probability ρ(s_0)·Π P(s_{h+1}|s_h, a_h). The policy factor
/// is left out so one enumeration serves any θ. Zero-probability paths are
/// included.
pub fn enumerate_trajectories(mdp: &TabularMdp, horizon: usize) -> Result<Vec<(Trajectory, f64)>> {
    let leaves = mdp.n_states as f64 * ((mdp.n_states * mdp.n_actions) as f64).powi(horizon as i32);
    if leaves > MAX_ENUMERATION_LEAVES as f64 {
        return Err(Error::EnumerationTooLarge {
            leaves,
            limit: MAX_ENUMERATION_LEAVES,
        });
    }
    let mut out = Vec::with_capacity(leaves as usize);
    for s0 in 0..mdp.n_states {
        let traj = Trajectory {
            states: vec![vec![s0 as f64]],
            actions: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
        };
        extend(mdp, horizon, traj, mdp.initial_dist[s0], &mut out);
    }
    Ok(out)
}

fn extend(
    mdp: &TabularMdp,
    horizon: usize,
    prefix: Trajectory,
    prob: f64,
    out: &mut Vec<(Trajectory, f64)>,
) {
    if prefix.len() == horizon {
        out.push((prefix, prob));
        return;
    }
    let s = prefix.states.last().expect("non-empty")[0] as usize;
    for a in 0..mdp.n_actions {
        for (next, p) in mdp.transition_row(s, a).iter().enumerate() {
            let mut t = prefix.clone();
            t.actions.push(a as f64);
            t.rewards.push(mdp.reward[s][a]);
            t.states.push(vec![next as f64]);
            extend(mdp, horizon, t, prob * p, out);
        }
    }
}
