//! Ground truth on small tabular MDPs: exact J(θ) and ∇J(θ) by full
//! trajectory enumeration, exact estimator moments, central finite
//! differences and Gauss–Hermite quadrature.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimator::{estimate, Baseline, EstimatorKind};
use crate::mdp::{enumerate_trajectories, TabularMdp, Trajectory};
use crate::policy::PolicySpec;
use crate::vector::{axpy, dot, GradEstimate, PolicyParams};

pub const DEFAULT_ORACLE_SEED: u64 = 20_190_101;
pub const DEFAULT_ORACLE_GAMMA: f64 = 0.9;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// 2 states, 2 actions, H = 3, seeded random tables with |r| ≤ 1.
pub fn default_oracle_mdp() -> TabularMdp {
    TabularMdp::random(2, 2, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(DEFAULT_ORACLE_SEED))
}

/// Softmax policy over the default oracle MDP (d = 4).
pub fn default_oracle_policy() -> PolicySpec {
    PolicySpec::softmax(2, 2)
}

/// The enumerated trajectory space of a tabular MDP at its horizon. Build
/// once and evaluate many θ against it.
#[derive(Debug, Clone)]
pub struct TrajectorySpace {
    paths: Vec<(Trajectory, f64)>,
}

impl TrajectorySpace {
    pub fn new(mdp: &TabularMdp) -> Result<Self> {
        Self::with_horizon(mdp, mdp.horizon)
    }

    pub fn with_horizon(mdp: &TabularMdp, horizon: usize) -> Result<Self> {
        let paths = enumerate_trajectories(mdp, horizon)?
            .into_iter()
            .filter(|(_, p)| *p > 0.0)
            .collect();
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[(Trajectory, f64)] {
        &self.paths
    }

    /// p(τ|θ) = env_prob(τ) · Π π_θ(a_h|s_h).
    pub fn probability(
        &self,
        spec: &PolicySpec,
        params: &PolicyParams,
        traj: &Trajectory,
        env_prob: f64,
    ) -> Result<f64> {
        let mut log_p = 0.0;
        for h in 0..traj.len() {
            log_p += spec.log_prob(params, &traj.states[h], traj.actions[h])?;
        }
        Ok(env_prob * log_p.exp())
    }

    /// Σ_τ p(τ|θ) f(τ) for a vector-valued f.
    pub fn expectation<F>(&self, spec: &PolicySpec, params: &PolicyParams, mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(&Trajectory) -> Result<Vec<f64>>,
    {
        let mut acc: Option<Vec<f64>> = None;
        for (traj, env_prob) in &self.paths {
            let p = self.probability(spec, params, traj, *env_prob)?;
            let value = f(traj)?;
            match acc.as_mut() {
                Some(a) => axpy(p, &value, a),
                None => acc = Some(value.iter().map(|v| p * v).collect()),
            }
        }
        acc.ok_or(Error::EmptyBatch)
    }

    pub fn total_probability(&self, spec: &PolicySpec, params: &PolicyParams) -> Result<f64> {
        Ok(self.expectation(spec, params, |_| Ok(vec![1.0]))?[0])
    }

    pub fn performance(&self, spec: &PolicySpec, params: &PolicyParams, gamma: f64) -> Result<f64> {
        Ok(self.expectation(spec, params, |t| Ok(vec![t.discounted_return(gamma)]))?[0])
    }

    /// Score form: Σ_τ p(τ|θ) (Σ_h ∇ log π(a_h|s_h)) R(τ).
    pub fn gradient(&self, spec: &PolicySpec, params: &PolicyParams, gamma: f64) -> Result<GradEstimate> {
        let g = self.expectation(spec, params, |t| {
            let mut total = vec![0.0; spec.dim()];
            for h in 0..t.len() {
                axpy(1.0, &spec.score(params, &t.states[h], t.actions[h])?, &mut total);
            }
            let ret = t.discounted_return(gamma);
            Ok(total.into_iter().map(|x| x * ret).collect())
        })?;
        Ok(GradEstimate(g))
    }

    /// Probability-derivative form Σ_τ ∇p(τ|θ) R(τ), expanding the product
    /// rule over softmax factors directly (no log-derivative).
    pub fn gradient_by_product_rule(
        &self,
        spec: &PolicySpec,
        params: &PolicyParams,
        gamma: f64,
    ) -> Result<GradEstimate> {
        let PolicySpec::Softmax { n_actions, .. } = *spec else {
            return Err(Error::DiagnosticUnavailable(
                "product-rule gradient is implemented for softmax policies".into(),
            ));
        };
        spec.check_params(params)?;
        let prob = |s: usize, a: usize| -> f64 {
            let row = &params[s * n_actions..(s + 1) * n_actions];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
            (row[a] - max).exp() / z
        };
        let mut grad = vec![0.0; spec.dim()];
        for (traj, env_prob) in &self.paths {
            let steps: Vec<(usize, usize)> = (0..traj.len())
                .map(|h| (traj.states[h][0] as usize, traj.actions[h] as usize))
                .collect();
            let factors: Vec<f64> = steps.iter().map(|&(s, a)| prob(s, a)).collect();
            let ret = traj.discounted_return(gamma);
            for (h, &(s, a)) in steps.iter().enumerate() {
                let others: f64 = factors
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != h)
                    .map(|(_, f)| f)
                    .product();
                // ∂π(a|s)/∂θ[s,b] = π(a|s)(δ_ab − π(b|s))
                for b in 0..n_actions {
                    let d_pi = factors[h] * (f64::from(u8::from(a == b)) - prob(s, b));
                    grad[s * n_actions + b] += env_prob * others * d_pi * ret;
                }
            }
        }
        Ok(GradEstimate(grad))
    }

    pub fn moments(
        &self,
        spec: &PolicySpec,
        params: &PolicyParams,
        kind: EstimatorKind,
        gamma: f64,
    ) -> Result<Moments> {
        // E[g] and E[‖g‖²] in one pass
        let d = spec.dim();
        let stacked = self.expectation(spec, params, |t| {
            let g = estimate(kind, t, spec, params, gamma, &Baseline::None)?;
            let mut v = g.0.clone();
            v.push(dot(&g, &g));
            Ok(v)
        })?;
        let mean = GradEstimate(stacked[..d].to_vec());
        let variance_trace = (stacked[d] - dot(&mean, &mean)).max(0.0);
        Ok(Moments {
            mean,
            variance_trace,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: GradEstimate,
    pub variance_trace: f64,
}

/// J(θ) = Σ_τ p(τ|θ) R(τ) at the MDP's horizon.
pub fn exact_performance(mdp: &TabularMdp, spec: &PolicySpec, params: &PolicyParams, gamma: f64) -> Result<f64> {
    TrajectorySpace::new(mdp)?.performance(spec, params, gamma)
}

/// ∇J(θ) = Σ_τ p(τ|θ) ∇ log p(τ|θ) R(τ) at the MDP's horizon.
pub fn exact_gradient(
    mdp: &TabularMdp,
    spec: &PolicySpec,
    params: &PolicyParams,
    gamma: f64,
) -> Result<GradEstimate> {
    TrajectorySpace::new(mdp)?.gradient(spec, params, gamma)
}

/// Exact E[g] and tr Cov[g] of an estimator under the enumerated
/// trajectory distribution.
pub fn estimator_moments(
    mdp: &TabularMdp,
    spec: &PolicySpec,
    params: &PolicyParams,
    kind: EstimatorKind,
    gamma: f64,
) -> Result<Moments> {
    TrajectorySpace::new(mdp)?.moments(spec, params, kind, gamma)
}

/// Central differences (f(θ + h·e_i) − f(θ − h·e_i)) / 2h per coordinate.
pub fn finite_diff_gradient<F>(mut f: F, params: &PolicyParams, step: f64) -> Result<GradEstimate>
where
    F: FnMut(&PolicyParams) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be > 0, got {step}")));
    }
    let mut probe = params.clone();
    let grad = (0..params.dim())
        .map(|i| {
            probe[i] = params[i] + step;
            let up = f(&probe)?;
            probe[i] = params[i] - step;
            let down = f(&probe)?;
            probe[i] = params[i];
            Ok((up - down) / (2.0 * step))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradEstimate(grad))
}

/// Nodes and weights for E[f(Z)], Z ~ N(0, 1): Σ wᵢ f(xᵢ) with n points.
/// Roots of the physicists' Hermite polynomial are found by Newton's
/// method from asymptotic initial guesses.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal recurrence
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    nodes
        .into_iter()
        .zip(weights)
        .map(|(x, w)| (x * std::f64::consts::SQRT_2, w / sqrt_pi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::{max_abs_diff, max_rel_err};

    #[test]
    fn zero_rewards_zero_performance() {
        let mut mdp = default_oracle_mdp();
        mdp.reward = vec![vec![0.0; 2]; 2];
        let spec = default_oracle_policy();
        let params = PolicyParams(vec![0.3, -0.2, 1.0, 0.5]);
        assert_eq!(exact_performance(&mdp, &spec, &params, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn single_state_geometric_sum() {
        let mdp = TabularMdp::new(1, 2, 3, vec![1.0], vec![vec![1.0], vec![1.0]], vec![vec![1.0, 1.0]])
            .unwrap();
        let spec = PolicySpec::softmax(1, 2);
        for params in [vec![0.0, 0.0], vec![2.0, -1.0]] {
            let j = exact_performance(&mdp, &spec, &PolicyParams(params), 0.5).unwrap();
            assert!((j - 1.75).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_mdp_uniform_policy_is_critical() {
        // swapping the two actions maps the MDP to itself
        let mdp = TabularMdp::new(
            2,
            2,
            3,
            vec![0.5, 0.5],
            vec![vec![0.7, 0.3], vec![0.7, 0.3], vec![0.2, 0.8], vec![0.2, 0.8]],
            vec![vec![0.4, 0.4], vec![-0.3, -0.3]],
        )
        .unwrap();
        let g = exact_gradient(&mdp, &PolicySpec::softmax(2, 2), &PolicyParams::zeros(4), 0.9).unwrap();
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn two_gradient_forms_agree() {
        let mdp = default_oracle_mdp();
        let spec = default_oracle_policy();
        let space = TrajectorySpace::new(&mdp).unwrap();
        let params = PolicyParams(vec![0.4, -1.1, 0.7, 0.2]);
        let a = space.gradient(&spec, &params, 0.9).unwrap();
        let b = space.gradient_by_product_rule(&spec, &params, 0.9).unwrap();
        assert!(max_abs_diff(&a, &b) <= 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mdp = default_oracle_mdp();
        let spec = default_oracle_policy();
        let space = TrajectorySpace::new(&mdp).unwrap();
        let params = PolicyParams(vec![-0.3, 0.8, 0.1, -0.6]);
        let g = space.gradient(&spec, &params, 0.9).unwrap();
        let fd = finite_diff_gradient(|p| space.performance(&spec, p, 0.9), &params, 1e-5).unwrap();
        assert!(max_rel_err(&g, &fd) <= 1e-6);
    }

    #[test]
    fn finite_differences_on_test_functions() {
        let quad = finite_diff_gradient(|p| Ok(p.iter().map(|x| x * x).sum()), &PolicyParams(vec![1.0, 2.0]), 1e-5)
            .unwrap();
        assert!(max_abs_diff(&quad, &[2.0, 4.0]) < 1e-8);
        let constant = finite_diff_gradient(|_| Ok(3.0), &PolicyParams(vec![1.0, 2.0, 3.0]), 1e-5).unwrap();
        assert!(constant.iter().all(|x| *x == 0.0));
        let c = [0.5, -2.0, 4.0];
        let linear = finite_diff_gradient(|p| Ok(dot(&c, p)), &PolicyParams(vec![0.1, 0.2, 0.3]), 1e-3).unwrap();
        assert!(max_abs_diff(&linear, &c) < 1e-12);
        assert!(finite_diff_gradient(|_| Ok(0.0), &PolicyParams(vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn deterministic_everything_has_zero_variance() {
        let mdp = TabularMdp::new(
            2,
            2,
            3,
            vec![1.0, 0.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.5], vec![-0.5, 0.25]],
        )
        .unwrap();
        let spec = PolicySpec::softmax(2, 2);
        let params = PolicyParams(vec![60.0, -60.0, -60.0, 60.0]);
        for kind in [EstimatorKind::Reinforce, EstimatorKind::Pgt, EstimatorKind::Gpomdp] {
            let m = estimator_moments(&mdp, &spec, &params, kind, 0.9).unwrap();
            assert!(m.variance_trace < 1e-30, "{kind:?}: {}", m.variance_trace);
        }
    }

    #[test]
    fn pgt_variance_below_reinforce() {
        let mdp = default_oracle_mdp();
        assert!(mdp.reward.iter().flatten().all(|r| *r != 0.0));
        let spec = default_oracle_policy();
        let params = PolicyParams(vec![0.2, -0.5, 0.3, 0.9]);
        let pgt = estimator_moments(&mdp, &spec, &params, EstimatorKind::Pgt, 0.9).unwrap();
        let rf = estimator_moments(&mdp, &spec, &params, EstimatorKind::Reinforce, 0.9).unwrap();
        assert!(pgt.variance_trace <= rf.variance_trace);
    }

    #[test]
    fn gauss_hermite_integrates_moments() {
        for n in [1usize, 2, 5, 10, 20] {
            let rule = gauss_hermite(n);
            let moment = |k: i32| rule.iter().map(|(x, w)| w * x.powi(k)).sum::<f64>();
            assert!((moment(0) - 1.0).abs() < 1e-13, "n={n}");
            if n >= 2 {
                assert!((moment(2) - 1.0).abs() < 1e-12, "n={n}");
            }
            if n >= 3 {
                assert!((moment(4) - 3.0).abs() < 1e-11, "n={n}");
            }
            assert!(moment(1).abs() < 1e-13);
        }
    }
}
