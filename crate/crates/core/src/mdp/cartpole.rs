use rand::{Rng, RngCore};

use super::{check_action, check_step, EnvState, Environment, StepOutcome};
use crate::error::Result;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
// half the pole length
const LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const X_THRESHOLD: f64 = 2.4;

/// Cart-pole balancing with a continuous horizontal force in
/// `[-10, 10]`. State is `(x, x_dot, theta, theta_dot)`; the reward is +1
/// for every step taken, and the episode fails once the pole leaves
/// ±12° or the cart leaves ±2.4.
#[derive(Debug, Clone)]
pub struct CartPole {
    horizon: usize,
}

impl CartPole {
    pub const DEFAULT_HORIZON: usize = 100;
    pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;

    pub fn new(horizon: usize) -> Self {
        Self { horizon }
    }

    pub fn is_failed(values: &[f64]) -> bool {
        values[0].abs() > X_THRESHOLD || values[2].abs() > Self::THETA_THRESHOLD
    }
}

impl Environment for CartPole {
    fn name(&self) -> &str {
        "cartpole"
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn action_bound(&self) -> f64 {
        FORCE_MAG
    }

    fn reset(&self, rng: &mut dyn RngCore) -> EnvState {
        let values = (0..4).map(|_| rng.random_range(-0.05..0.05)).collect();
        EnvState {
            values,
            step_index: 0,
        }
    }

    fn step(&self, state: &EnvState, action: f64, _rng: &mut dyn RngCore) -> Result<StepOutcome> {
        check_action(action)?;
        check_step(state, self.horizon)?;
        let force = action.clamp(-FORCE_MAG, FORCE_MAG);
        let [x, x_dot, theta, theta_dot] = [
            state.values[0],
            state.values[1],
            state.values[2],
            state.values[3],
        ];
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;

        let values = vec![
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ];
        let step_index = state.step_index + 1;
        let done = Self::is_failed(&values) || step_index >= self.horizon;
        Ok(StepOutcome {
            state: EnvState { values, step_index },
            reward: 1.0,
            done,
        })
    }
}
