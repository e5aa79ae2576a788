use rand::RngCore;

use super::{check_action, check_step, EnvState, Environment, StepOutcome};
use crate::error::Result;

/// Single-state continuous bandit repeated for `horizon` steps: the
/// observation is a fixed vector and the reward is `R·tanh(a)`. Used for
/// bounded-feature variance diagnostics.
#[derive(Debug, Clone)]
pub struct LinearBandit {
    observation: Vec<f64>,
    reward_bound: f64,
    horizon: usize,
}

impl LinearBandit {
    pub fn new(observation: Vec<f64>, reward_bound: f64, horizon: usize) -> Self {
        Self {
            observation,
            reward_bound,
            horizon,
        }
    }
}

impl Environment for LinearBandit {
    fn name(&self) -> &str {
        "bandit"
    }

    fn obs_dim(&self) -> usize {
        self.observation.len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    fn action_bound(&self) -> f64 {
        f64::INFINITY
    }

    fn reset(&self, _rng: &mut dyn RngCore) -> EnvState {
        EnvState {
            values: self.observation.clone(),
            step_index: 0,
        }
    }

    fn step(&self, state: &EnvState, action: f64, _rng: &mut dyn RngCore) -> Result<StepOutcome> {
        check_action(action)?;
        check_step(state, self.horizon)?;
        let step_index = state.step_index + 1;
        Ok(StepOutcome {
            state: EnvState {
                values: self.observation.clone(),
                step_index,
            },
            reward: self.reward_bound * action.tanh(),
            done: step_index >= self.horizon,
        })
    }
}
