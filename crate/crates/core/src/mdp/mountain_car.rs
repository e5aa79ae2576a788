use rand::{Rng, RngCore};

use super::{check_action, check_step, EnvState, Environment, StepOutcome};
use crate::error::Result;

const MIN_POSITION: f64 = -1.2;
const MAX_POSITION: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const GOAL_POSITION: f64 = 0.45;
const POWER: f64 = 0.0015;
const GOAL_REWARD: f64 = 100.0;

/// Continuous mountain car: state `(position, velocity)`, force in
/// `[-1, 1]`. Each step costs `0.1·a²`; reaching the goal pays +100 and
/// ends the episode.
#[derive(Debug, Clone)]
pub struct MountainCar {
    horizon: usize,
}

impl MountainCar {
    pub const DEFAULT_HORIZON: usize = 1000;

    pub fn new(horizon: usize) -> Self {
        Self { horizon }
    }
}

impl Environment for MountainCar {
    fn name(&self) -> &str {
        "mountaincar"
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reward_bound(&self) -> f64 {
        GOAL_REWARD
    }

    fn action_bound(&self) -> f64 {
        1.0
    }

    fn reset(&self, rng: &mut dyn RngCore) -> EnvState {
        EnvState {
            values: vec![rng.random_range(-0.6..-0.4), 0.0],
            step_index: 0,
        }
    }

    fn step(&self, state: &EnvState, action: f64, _rng: &mut dyn RngCore) -> Result<StepOutcome> {
        check_action(action)?;
        check_step(state, self.horizon)?;
        let force = action.clamp(-1.0, 1.0);
        let mut position = state.values[0];
        let mut velocity = state.values[1];

        velocity += force * POWER - 0.0025 * (3.0 * position).cos();
        velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        position = (position + velocity).clamp(MIN_POSITION, MAX_POSITION);
        if position == MIN_POSITION && velocity < 0.0 {
            velocity = 0.0;
        }

        let at_goal = position >= GOAL_POSITION;
        let mut reward = -0.1 * force * force;
        if at_goal {
            reward += GOAL_REWARD;
        }
        let step_index = state.step_index + 1;
        Ok(StepOutcome {
            state: EnvState {
                values: vec![position, velocity],
                step_index,
            },
            reward,
            done: at_goal || step_index >= self.horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn goal_pays_bonus_and_terminates() {
        let env = MountainCar::new(1000);
        let state = EnvState {
            values: vec![0.44, 0.05],
            step_index: 0,
        };
        let out = env.step(&state, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(out.done);
        assert!((out.reward - (100.0 - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn left_wall_stops_the_car() {
        let env = MountainCar::new(1000);
        let state = EnvState {
            values: vec![-1.2, -0.07],
            step_index: 0,
        };
        let out = env.step(&state, -1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.state.values, vec![-1.2, 0.0]);
    }
}
