use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{check_action, check_step, EnvState, Environment, StepOutcome};
use crate::error::Result;

const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const DT: f64 = 0.05;
const G: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;

/// Torque-limited pendulum swing-up. Internal state `(angle, velocity)`
/// with angle 0 upright; the policy observes `(cos, sin, velocity)`.
/// Reward is `-(angle² + 0.1·vel² + 0.001·a²)` with the angle wrapped to
/// `[-π, π)`. There is no terminal state.
#[derive(Debug, Clone)]
pub struct Pendulum {
    horizon: usize,
}

impl Pendulum {
    pub const DEFAULT_HORIZON: usize = 200;

    pub fn new(horizon: usize) -> Self {
        Self { horizon }
    }
}

fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Environment for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reward_bound(&self) -> f64 {
        PI * PI + 0.1 * MAX_SPEED * MAX_SPEED + 0.001 * MAX_TORQUE * MAX_TORQUE
    }

    fn action_bound(&self) -> f64 {
        MAX_TORQUE
    }

    fn reset(&self, rng: &mut dyn RngCore) -> EnvState {
        EnvState {
            values: vec![rng.random_range(-PI..PI), rng.random_range(-1.0..1.0)],
            step_index: 0,
        }
    }

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        let (sin, cos) = state.values[0].sin_cos();
        vec![cos, sin, state.values[1]]
    }

    fn step(&self, state: &EnvState, action: f64, _rng: &mut dyn RngCore) -> Result<StepOutcome> {
        check_action(action)?;
        check_step(state, self.horizon)?;
        let u = action.clamp(-MAX_TORQUE, MAX_TORQUE);
        let th = state.values[0];
        let thdot = state.values[1];
        let angle = wrap_angle(th);
        let cost = angle * angle + 0.1 * thdot * thdot + 0.001 * u * u;

        let new_thdot = (thdot
            + (3.0 * G / (2.0 * LENGTH) * th.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u) * DT)
            .clamp(-MAX_SPEED, MAX_SPEED);
        let new_th = th + new_thdot * DT;
        let step_index = state.step_index + 1;
        Ok(StepOutcome {
            state: EnvState {
                values: vec![new_th, new_thdot],
                step_index,
            },
            reward: -cost,
            done: step_index >= self.horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn upright_equilibrium_is_fixed_point() {
        let env = Pendulum::new(200);
        let state = EnvState {
            values: vec![0.0, 0.0],
            step_index: 0,
        };
        let out = env.step(&state, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.state.values, vec![0.0, 0.0]);
        assert_eq!(out.reward, 0.0);
        assert!(!out.done);
    }

    #[test]
    fn observation_is_cos_sin_velocity() {
        let env = Pendulum::new(200);
        let state = EnvState {
            values: vec![PI / 2.0, 0.5],
            step_index: 0,
        };
        let obs = env.observe(&state);
        assert!(obs[0].abs() < 1e-15);
        assert!((obs[1] - 1.0).abs() < 1e-15);
        assert_eq!(obs[2], 0.5);
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_angle(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
        assert!((wrap_angle(-0.1) + 0.1).abs() < 1e-12);
    }
}
