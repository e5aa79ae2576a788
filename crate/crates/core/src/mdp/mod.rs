//! Environments: the three classic-control tasks with a continuous 1-D
//! action, a single-state linear bandit, and finite tabular MDPs whose
//! trajectory space can be enumerated exactly.

mod bandit;
mod cartpole;
mod mountain_car;
mod pendulum;
mod tabular;

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::policy::PolicySpec;
use crate::vector::PolicyParams;

pub use bandit::LinearBandit;
pub use cartpole::CartPole;
pub use mountain_car::MountainCar;
pub use pendulum::Pendulum;
pub use tabular::{enumerate_trajectories, TabularMdp, MAX_ENUMERATION_LEAVES};

/// Internal environment state. `values` is the simulator state (which may
/// differ from what the policy observes, see [`Environment::observe`]).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub values: Vec<f64>,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
}

/// One episode: `states` holds the observations s_0..s_len, so it is one
/// longer than `actions` and `rewards`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// R(τ) = Σ γʰ r_h.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut discount = 1.0;
        let mut total = 0.0;
        for r in &self.rewards {
            total += discount * r;
            discount *= gamma;
        }
        total
    }

    pub fn undiscounted_return(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// A value-semantic episodic environment with a scalar action.
///
/// Implementations hold no mutable state: `step` maps a state to the next
/// one, so rollouts with different rngs can run concurrently.
pub trait Environment: Send + Sync {
    fn name(&self) -> &str;

    /// Dimension of the observation vector handed to policies.
    fn obs_dim(&self) -> usize;

    /// Hard truncation horizon H.
    fn horizon(&self) -> usize;

    /// Bound R on |r(s, a)|.
    fn reward_bound(&self) -> f64;

    /// Actions are clamped to `[-action_bound, action_bound]` inside `step`.
    fn action_bound(&self) -> f64;

    fn reset(&self, rng: &mut dyn RngCore) -> EnvState;

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        state.values.clone()
    }

    fn step(&self, state: &EnvState, action: f64, rng: &mut dyn RngCore) -> Result<StepOutcome>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn reward_bound(&self) -> f64 {
        (**self).reward_bound()
    }
    fn action_bound(&self) -> f64 {
        (**self).action_bound()
    }
    fn reset(&self, rng: &mut dyn RngCore) -> EnvState {
        (**self).reset(rng)
    }
    fn observe(&self, state: &EnvState) -> Vec<f64> {
        (**self).observe(state)
    }
    fn step(&self, state: &EnvState, action: f64, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        (**self).step(state, action, rng)
    }
}

pub(crate) fn check_action(action: f64) -> Result<()> {
    if action.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("non-finite action {action}")))
    }
}

pub(crate) fn check_step(state: &EnvState, horizon: usize) -> Result<()> {
    if state.step_index >= horizon {
        return Err(Error::InvalidInput(format!(
            "step called at step_index {} with horizon {horizon}",
            state.step_index
        )));
    }
    Ok(())
}

/// Generic episode loop: `act` chooses an action from the current
/// observation. The episode ends at `horizon`, the environment's own
/// horizon, or the first terminal transition, whichever is first.
pub fn rollout_with<E, F>(
    env: &E,
    horizon: usize,
    rng: &mut dyn RngCore,
    mut act: F,
) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    F: FnMut(&[f64], &mut dyn RngCore) -> Result<f64>,
{
    if horizon == 0 {
        return Err(Error::InvalidInput("rollout horizon must be >= 1".into()));
    }
    let horizon = horizon.min(env.horizon());
    let mut state = env.reset(rng);
    let mut traj = Trajectory::default();
    traj.states.push(env.observe(&state));
    for _ in 0..horizon {
        let obs = traj.states.last().expect("non-empty");
        let action = act(obs, rng)?;
        let out = env.step(&state, action, rng)?;
        traj.actions.push(action);
        traj.rewards.push(out.reward);
        traj.states.push(env.observe(&out.state));
        state = out.state;
        if out.done {
            break;
        }
    }
    Ok(traj)
}

/// Samples one trajectory with actions drawn from π_θ(·|s).
pub fn rollout<E: Environment + ?Sized>(
    env: &E,
    spec: &PolicySpec,
    params: &PolicyParams,
    horizon: usize,
    rng: &mut dyn RngCore,
) -> Result<Trajectory> {
    spec.check_params(params)?;
    rollout_with(env, horizon, rng, |obs, rng| spec.sample_action(params, obs, rng))
}

/// Wraps an environment and counts episodes (calls to `reset`).
pub struct CountingEnv<E> {
    inner: E,
    episodes: AtomicUsize,
}

impl<E> CountingEnv<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            episodes: AtomicUsize::new(0),
        }
    }

    pub fn episodes(&self) -> usize {
        self.episodes.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Environment> Environment for CountingEnv<E> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }
    fn reward_bound(&self) -> f64 {
        self.inner.reward_bound()
    }
    fn action_bound(&self) -> f64 {
        self.inner.action_bound()
    }
    fn reset(&self, rng: &mut dyn RngCore) -> EnvState {
        self.episodes.fetch_add(1, Ordering::SeqCst);
        self.inner.reset(rng)
    }
    fn observe(&self, state: &EnvState) -> Vec<f64> {
        self.inner.observe(state)
    }
    fn step(&self, state: &EnvState, action: f64, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        self.inner.step(state, action, rng)
    }
}

/// Builds an environment from its string id: `cartpole`, `mountaincar`,
/// `pendulum` or `tabular:<path>`. `horizon` overrides the default task
/// horizon when given.
pub fn make_env(id: &str, horizon: Option<usize>) -> Result<Box<dyn Environment>> {
    let env: Box<dyn Environment> = match id {
        "cartpole" => Box::new(CartPole::new(horizon.unwrap_or(CartPole::DEFAULT_HORIZON))),
        "mountaincar" => Box::new(MountainCar::new(
            horizon.unwrap_or(MountainCar::DEFAULT_HORIZON),
        )),
        "pendulum" => Box::new(Pendulum::new(horizon.unwrap_or(Pendulum::DEFAULT_HORIZON))),
        other => match other.strip_prefix("tabular:") {
            Some(path) => {
                let mut mdp = TabularMdp::load(path)?;
                if let Some(h) = horizon {
                    mdp.horizon = h;
                }
                Box::new(mdp)
            }
            None => return Err(Error::Config(format!("unknown environment id '{other}'"))),
        },
    };
    Ok(env)
}
