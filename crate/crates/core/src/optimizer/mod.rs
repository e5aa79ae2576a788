//! Projected stochastic ascent loops: the recursive variance-reduced
//! method (SRVR-PG), the SVRG-style baseline (SVRPG), plain GPOMDP ascent,
//! plus the projection and gradient-mapping operators and the closed-form
//! theory constants.

mod runs;
mod theory;

use crate::error::{Error, Result};
use crate::estimator::{Baseline, EstimatorKind};
use crate::vector::{GradEstimate, PolicyParams};

pub use runs::{gpomdp_run, srvr_pg_run, svrpg_run, ActionSampler, GradientSampler};
pub(crate) use runs::{run_plain_ascent, run_recursive};
pub use theory::{
    recommended_batches, smoothness_constants, theoretical_step_size, variance_bound_gaussian,
    BatchConstants, BatchSchedule,
};

/// Convex feasible set Θ.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ConstraintSet {
    #[default]
    Unconstrained,
    L2Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl ConstraintSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let c = Self::L2Ball { center, radius };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Unconstrained => Ok(()),
            Self::L2Ball { center, radius } => {
                if !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidInput("ball needs a finite center and radius > 0".into()));
                }
                Ok(())
            }
            Self::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::InvalidInput("box needs lower <= upper componentwise".into()));
                }
                Ok(())
            }
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let expected = match self {
            Self::Unconstrained => return Ok(()),
            Self::L2Ball { center, .. } => center.len(),
            Self::Box { lower, .. } => lower.len(),
        };
        if expected != dim {
            return Err(Error::ShapeMismatch {
                expected,
                actual: dim,
            });
        }
        Ok(())
    }
}

/// Euclidean projection onto Θ: identity, radial scaling onto a ball, or a
/// componentwise clamp onto a box.
pub fn project(theta: &PolicyParams, constraint: &ConstraintSet) -> Result<PolicyParams> {
    constraint.check_dim(theta.dim())?;
    Ok(match constraint {
        ConstraintSet::Unconstrained => theta.clone(),
        ConstraintSet::L2Ball { center, radius } => {
            let offset: Vec<f64> = theta.iter().zip(center).map(|(t, c)| t - c).collect();
            let dist = crate::vector::norm(&offset);
            if dist <= *radius {
                theta.clone()
            } else {
                let s = radius / dist;
                PolicyParams(center.iter().zip(&offset).map(|(c, o)| c + s * o).collect())
            }
        }
        ConstraintSet::Box { lower, upper } => PolicyParams(
            theta
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(t, (l, u))| t.clamp(*l, *u))
                .collect(),
        ),
    })
}

/// G_η(θ) = (P_Θ(θ + η·grad) − θ) / η. Returns `grad` unchanged when Θ = ℝᵈ.
pub fn gradient_mapping(
    theta: &PolicyParams,
    grad: &GradEstimate,
    eta: f64,
    constraint: &ConstraintSet,
) -> Result<GradEstimate> {
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!("step size must be > 0, got {eta}")));
    }
    if theta.dim() != grad.dim() {
        return Err(Error::ShapeMismatch {
            expected: theta.dim(),
            actual: grad.dim(),
        });
    }
    if matches!(constraint, ConstraintSet::Unconstrained) {
        return Ok(grad.clone());
    }
    let moved = PolicyParams(theta.iter().zip(grad.iter()).map(|(t, g)| t + eta * g).collect());
    let projected = project(&moved, constraint)?;
    Ok(GradEstimate(
        projected.iter().zip(theta.iter()).map(|(p, t)| (p - t) / eta).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputRule {
    #[default]
    Last,
    /// Uniformly pick one of the iterates at which an update direction was
    /// computed.
    Uniform,
}

/// Inputs shared by all run loops. For plain ascent, `epochs` is the
/// number of iterations and `snapshot_batch` the batch size.
#[derive(Debug, Clone, PartialEq)]
pub struct SrvrPgConfig {
    pub epochs: usize,
    pub epoch_len: usize,
    pub step_size: f64,
    pub snapshot_batch: usize,
    pub inner_batch: usize,
    pub gamma: f64,
    pub horizon: usize,
    pub constraint: ConstraintSet,
    pub estimator: EstimatorKind,
    pub baseline: Baseline,
    pub output_rule: OutputRule,
    /// Optional cap on importance weights (off by default).
    pub weight_cap: Option<f64>,
    /// Stop before any batch that would push the episode count past this.
    pub trajectory_budget: Option<usize>,
}

impl Default for SrvrPgConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            epoch_len: 1,
            step_size: 0.01,
            snapshot_batch: 10,
            inner_batch: 10,
            gamma: 0.99,
            horizon: 100,
            constraint: ConstraintSet::Unconstrained,
            estimator: EstimatorKind::Gpomdp,
            baseline: Baseline::None,
            output_rule: OutputRule::Last,
            weight_cap: None,
            trajectory_budget: None,
        }
    }
}

impl SrvrPgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.epoch_len == 0 || self.snapshot_batch == 0 || self.inner_batch == 0 {
            return Err(Error::Config("S, m, N and B must all be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step size must be finite and >= 0, got {}", self.step_size)));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if let Some(cap) = self.weight_cap {
            if !(cap >= 1.0) {
                return Err(Error::Config(format!("weight cap must be >= 1, got {cap}")));
            }
        }
        self.constraint.validate()
    }

    /// Episodes consumed by `epochs` full epochs of SRVR-PG: S·N + S·(m−1)·B.
    pub fn srvr_episodes(&self) -> usize {
        self.epochs * (self.snapshot_batch + (self.epoch_len - 1) * self.inner_batch)
    }
}

/// One policy update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    /// Cumulative episodes sampled up to and including this update's batch.
    pub trajectories: usize,
    pub epoch: usize,
    pub step: usize,
    /// Mean undiscounted return of the batch sampled for this update.
    pub avg_return: f64,
    /// ‖update direction‖₂
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbortInfo {
    pub epoch: usize,
    pub step: usize,
    pub reason: String,
    pub max_weight: f64,
    pub mean_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub records: Vec<UpdateRecord>,
    pub final_params: PolicyParams,
    pub output_params: PolicyParams,
    pub total_trajectories: usize,
    pub weight_stats: crate::estimator::WeightStats,
    /// Set when the run stopped early on a non-finite value or weight overflow.
    pub aborted: Option<AbortInfo>,
}

impl RunHistory {
    /// Converts an aborted run into an error.
    pub fn into_result(self) -> Result<Self> {
        match self.aborted {
            Some(a) => Err(Error::Aborted {
                epoch: a.epoch,
                step: a.step,
                reason: a.reason,
            }),
            None => Ok(self),
        }
    }

    /// Trajectory count at the first update whose batch return reached
    /// `threshold`.
    pub fn trajectories_to_reach(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.avg_return >= threshold)
            .map(|r| r.trajectories)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::max_abs_diff;

    #[test]
    fn unconstrained_projection_is_identity() {
        let theta = PolicyParams(vec![1.5, -2.0, 1e9]);
        assert_eq!(project(&theta, &ConstraintSet::Unconstrained).unwrap(), theta);
    }

    #[test]
    fn ball_projection() {
        let ball = ConstraintSet::ball(vec![0.0, 0.0], 5.0).unwrap();
        let inside = PolicyParams(vec![3.0, 4.0]);
        assert_eq!(project(&inside, &ball).unwrap(), inside);
        let outside = project(&PolicyParams(vec![6.0, 8.0]), &ball).unwrap();
        assert!(max_abs_diff(&outside, &[3.0, 4.0]) <= 1e-12);
        let shifted = ConstraintSet::ball(vec![1.0, 1.0], 1.0).unwrap();
        let p = project(&PolicyParams(vec![1.0, 3.0]), &shifted).unwrap();
        assert!(max_abs_diff(&p, &[1.0, 2.0]) <= 1e-15);
    }

    #[test]
    fn box_projection_clamps() {
        let b = ConstraintSet::Box {
            lower: vec![-1.0, 0.0],
            upper: vec![1.0, 2.0],
        };
        let p = project(&PolicyParams(vec![-3.0, 1.0]), &b).unwrap();
        assert_eq!(p.0, vec![-1.0, 1.0]);
    }

    #[test]
    fn invalid_constraints_rejected() {
        assert!(ConstraintSet::ball(vec![0.0], 0.0).is_err());
        assert!(ConstraintSet::Box {
            lower: vec![1.0],
            upper: vec![0.0]
        }
        .validate()
        .is_err());
        let ball = ConstraintSet::ball(vec![0.0; 3], 1.0).unwrap();
        assert!(project(&PolicyParams(vec![0.0; 2]), &ball).is_err());
    }

    #[test]
    fn unconstrained_mapping_returns_gradient_bitwise() {
        let theta = PolicyParams(vec![0.1, 0.2]);
        let g = GradEstimate(vec![0.123456789, -9.87654321e-7]);
        let m = gradient_mapping(&theta, &g, 0.3, &ConstraintSet::Unconstrained).unwrap();
        assert_eq!(m, g);
    }

    #[test]
    fn mapping_vanishes_for_outward_gradient_on_boundary() {
        let ball = ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let theta = PolicyParams(vec![0.6, 0.8]);
        let g = GradEstimate(vec![1.2, 1.6]);
        let m = gradient_mapping(&theta, &g, 0.5, &ball).unwrap();
        assert!(m.norm() < 1e-15);
    }

    #[test]
    fn mapping_hand_value() {
        let ball = ConstraintSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let m = gradient_mapping(
            &PolicyParams(vec![1.0, 0.0]),
            &GradEstimate(vec![0.0, 1.0]),
            1.0,
            &ball,
        )
        .unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!(max_abs_diff(&m, &[r - 1.0, r]) <= 1e-15);
        assert!(gradient_mapping(&PolicyParams(vec![0.0]), &GradEstimate(vec![0.0]), 0.0, &ball).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SrvrPgConfig::default().validate().is_ok());
        let bad = SrvrPgConfig {
            gamma: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SrvrPgConfig {
            inner_batch: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let c = SrvrPgConfig {
            epochs: 4,
            epoch_len: 5,
            snapshot_batch: 100,
            inner_batch: 10,
            ..Default::default()
        };
        assert_eq!(c.srvr_episodes(), 560);
    }
}
