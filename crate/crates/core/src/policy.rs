//! Stochastic policies: Gaussian with a linear or tanh-MLP mean, and a
//! tabular softmax. Each exposes sampling, the exact log-density and its
//! gradient with respect to the flat parameter vector (the score).

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::vector::{dot, GradEstimate, PolicyParams};

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// N(θᵀφ(s), σ²) with φ(s) = (s, 1).
    LinearGaussian { obs_dim: usize, sigma: f64 },
    /// N(μ_θ(s), σ²) where μ_θ is a tanh MLP with a linear output unit.
    MlpGaussian {
        obs_dim: usize,
        hidden: Vec<usize>,
        sigma: f64,
    },
    /// π(a|s) ∝ exp(θ[s, a]) over a finite state/action space; the
    /// observation is the state index.
    Softmax { n_states: usize, n_actions: usize },
}

impl PolicySpec {
    pub fn linear(obs_dim: usize, sigma: f64) -> Self {
        Self::LinearGaussian { obs_dim, sigma }
    }

    pub fn mlp(obs_dim: usize, hidden: Vec<usize>, sigma: f64) -> Self {
        Self::MlpGaussian {
            obs_dim,
            hidden,
            sigma,
        }
    }

    pub fn softmax(n_states: usize, n_actions: usize) -> Self {
        Self::Softmax {
            n_states,
            n_actions,
        }
    }

    /// Builds a spec from its config name: `linear`, `mlp64`, `mlp8x8`
    /// (any `mlpAxBx..`), or `softmax` (which needs the tabular sizes).
    pub fn from_name(
        name: &str,
        obs_dim: usize,
        sigma: f64,
        tabular: Option<(usize, usize)>,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        match name {
            "linear" => Ok(Self::linear(obs_dim, sigma)),
            "softmax" => {
                let (n_states, n_actions) = tabular.ok_or_else(|| {
                    Error::Config("softmax policy requires a tabular environment".into())
                })?;
                Ok(Self::softmax(n_states, n_actions))
            }
            other => {
                let widths = other
                    .strip_prefix("mlp")
                    .filter(|w| !w.is_empty())
                    .ok_or_else(|| Error::Config(format!("unknown policy '{other}'")))?;
                let hidden = widths
                    .split('x')
                    .map(|w| w.parse::<usize>().ok().filter(|w| *w > 0))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::Config(format!("bad MLP shape '{other}'")))?;
                Ok(Self::mlp(obs_dim, hidden, sigma))
            }
        }
    }

    /// Total parameter count d.
    pub fn dim(&self) -> usize {
        match self {
            Self::LinearGaussian { obs_dim, .. } => obs_dim + 1,
            Self::MlpGaussian {
                obs_dim, hidden, ..
            } => layer_sizes(*obs_dim, hidden)
                .windows(2)
                .map(|w| w[0] * w[1] + w[1])
                .sum(),
            Self::Softmax {
                n_states,
                n_actions,
            } => n_states * n_actions,
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            Self::LinearGaussian { sigma, .. } | Self::MlpGaussian { sigma, .. } => Some(*sigma),
            Self::Softmax { .. } => None,
        }
    }

    pub fn check_params(&self, params: &PolicyParams) -> Result<()> {
        if params.dim() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                actual: params.dim(),
            });
        }
        Ok(())
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) per layer; zeros (the uniform
    /// policy) for softmax.
    pub fn init_params(&self, rng: &mut dyn RngCore) -> PolicyParams {
        let mut theta = Vec::with_capacity(self.dim());
        match self {
            Self::LinearGaussian { obs_dim, .. } => {
                let bound = 1.0 / ((obs_dim + 1) as f64).sqrt();
                theta.extend((0..=*obs_dim).map(|_| rng.random_range(-bound..bound)));
            }
            Self::MlpGaussian {
                obs_dim, hidden, ..
            } => {
                for w in layer_sizes(*obs_dim, hidden).windows(2) {
                    let bound = 1.0 / (w[0] as f64).sqrt();
                    theta.extend((0..w[0] * w[1] + w[1]).map(|_| rng.random_range(-bound..bound)));
                }
            }
            Self::Softmax { .. } => theta.resize(self.dim(), 0.0),
        }
        PolicyParams(theta)
    }

    /// Mean action μ_θ(s) for Gaussian policies; the most likely action
    /// (lowest index on ties) for softmax. This is the deterministic policy
    /// used by parameter-based exploration.
    pub fn mean(&self, params: &PolicyParams, obs: &[f64]) -> Result<f64> {
        self.check_params(params)?;
        match self {
            Self::LinearGaussian { .. } => Ok(linear_mean(params, obs)),
            Self::MlpGaussian {
                obs_dim, hidden, ..
            } => Ok(Mlp::new(*obs_dim, hidden).forward(params, obs).output()),
            Self::Softmax { n_actions, .. } => {
                let row = softmax_row(params, *n_actions, state_index(obs));
                let best = row
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                        if v > bv {
                            (i, v)
                        } else {
                            (bi, bv)
                        }
                    })
                    .0;
                Ok(best as f64)
            }
        }
    }

    /// Gaussian action for a given standard-normal draw `z`: μ_θ(s) + σ·z.
    pub fn action_from_noise(&self, params: &PolicyParams, obs: &[f64], z: f64) -> Result<f64> {
        match self.sigma() {
            Some(sigma) => Ok(self.mean(params, obs)? + sigma * z),
            None => Err(Error::InvalidInput(
                "action_from_noise is defined for Gaussian policies only".into(),
            )),
        }
    }

    pub fn sample_action(
        &self,
        params: &PolicyParams,
        obs: &[f64],
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        match self {
            Self::Softmax { n_actions, .. } => {
                self.check_params(params)?;
                let probs = softmax_probs(softmax_row(params, *n_actions, state_index(obs)));
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Ok(a as f64);
                    }
                }
                Ok((n_actions - 1) as f64)
            }
            _ => {
                let z: f64 = rng.sample(StandardNormal);
                self.action_from_noise(params, obs, z)
            }
        }
    }

    pub fn log_prob(&self, params: &PolicyParams, obs: &[f64], action: f64) -> Result<f64> {
        match self {
            Self::Softmax { n_actions, .. } => {
                self.check_params(params)?;
                let row = softmax_row(params, *n_actions, state_index(obs));
                let a = action_index(action, *n_actions)?;
                Ok(row[a] - log_sum_exp(row))
            }
            _ => {
                let sigma = self.sigma().expect("gaussian");
                let mu = self.mean(params, obs)?;
                let diff = action - mu;
                Ok(-diff * diff / (2.0 * sigma * sigma) - 0.5 * (2.0 * PI * sigma * sigma).ln())
            }
        }
    }

    /// ∇_θ log π_θ(a|s), flattened to dimension d.
    pub fn score(&self, params: &PolicyParams, obs: &[f64], action: f64) -> Result<GradEstimate> {
        self.check_params(params)?;
        let mut grad = vec![0.0; self.dim()];
        self.accumulate_score(params, obs, action, 1.0, &mut grad)?;
        Ok(GradEstimate(grad))
    }

    /// `out += weight · ∇_θ log π_θ(a|s)` without allocating a fresh vector
    /// for the linear and softmax cases.
    pub(crate) fn accumulate_score(
        &self,
        params: &PolicyParams,
        obs: &[f64],
        action: f64,
        weight: f64,
        out: &mut [f64],
    ) -> Result<()> {
        match self {
            Self::LinearGaussian { obs_dim, sigma } => {
                let coef = weight * (action - linear_mean(params, obs)) / (sigma * sigma);
                for (o, x) in out.iter_mut().zip(obs.iter().take(*obs_dim)) {
                    *o += coef * x;
                }
                out[*obs_dim] += coef;
            }
            Self::MlpGaussian {
                obs_dim,
                hidden,
                sigma,
            } => {
                let mlp = Mlp::new(*obs_dim, hidden);
                let cache = mlp.forward(params, obs);
                let coef = weight * (action - cache.output()) / (sigma * sigma);
                mlp.backward(params, &cache, coef, out);
            }
            Self::Softmax { n_actions, .. } => {
                let s = state_index(obs);
                let probs = softmax_probs(softmax_row(params, *n_actions, s));
                let a = action_index(action, *n_actions)?;
                let row = &mut out[s * n_actions..(s + 1) * n_actions];
                for (b, (o, p)) in row.iter_mut().zip(&probs).enumerate() {
                    *o += weight * (f64::from(u8::from(a == b)) - p);
                }
            }
        }
        Ok(())
    }
}

/// Closed-form bounds (G, M) on ‖∇ log π‖ and ‖∇² log π‖ for a
/// linear-Gaussian policy with ‖φ(s)‖ ≤ `feature_bound` and |a| ≤
/// `action_bound`: G = C_a·M_φ/σ², M = M_φ²/σ².
pub fn assumption_constants(
    spec: &PolicySpec,
    feature_bound: f64,
    action_bound: f64,
) -> Result<(f64, f64)> {
    match spec {
        PolicySpec::LinearGaussian { sigma, .. } => {
            let s2 = sigma * sigma;
            Ok((action_bound * feature_bound / s2, feature_bound * feature_bound / s2))
        }
        _ => Err(Error::DiagnosticUnavailable(
            "closed-form (G, M) exist only for linear-Gaussian policies".into(),
        )),
    }
}

fn state_index(obs: &[f64]) -> usize {
    obs[0] as usize
}

fn action_index(action: f64, n_actions: usize) -> Result<usize> {
    if action >= 0.0 && action.fract() == 0.0 && (action as usize) < n_actions {
        Ok(action as usize)
    } else {
        Err(Error::InvalidInput(format!("action {action} is not an index in 0..{n_actions}")))
    }
}

fn linear_mean(params: &PolicyParams, obs: &[f64]) -> f64 {
    let n = params.dim() - 1;
    dot(&params[..n], &obs[..n]) + params[n]
}

fn softmax_row(params: &PolicyParams, n_actions: usize, s: usize) -> &[f64] {
    &params[s * n_actions..(s + 1) * n_actions]
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softmax_probs(row: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(row);
    row.iter().map(|x| (x - lse).exp()).collect()
}

fn layer_sizes(obs_dim: usize, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(obs_dim);
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes
}

/// Parameter layout per layer: row-major weights (out × in) followed by
/// the bias vector.
struct Mlp {
    sizes: Vec<usize>,
}

struct ForwardCache {
    // activations[0] is the input; the last entry is the scalar output
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    fn output(&self) -> f64 {
        self.activations.last().expect("output layer")[0]
    }
}

impl Mlp {
    fn new(obs_dim: usize, hidden: &[usize]) -> Self {
        Self {
            sizes: layer_sizes(obs_dim, hidden),
        }
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn forward(&self, params: &[f64], obs: &[f64]) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(obs[..self.sizes[0]].to_vec());
        let mut offset = 0;
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let weights = &params[offset..offset + fan_in * fan_out];
            let bias = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let input = &activations[l];
            let last = l + 1 == self.n_layers();
            let out = (0..fan_out)
                .map(|j| {
                    let z = dot(&weights[j * fan_in..(j + 1) * fan_in], input) + bias[j];
                    if last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            activations.push(out);
            offset += fan_in * fan_out + fan_out;
        }
        ForwardCache { activations }
    }

    /// Adds `coef · ∇_θ μ_θ(s)` to `out`.
    fn backward(&self, params: &[f64], cache: &ForwardCache, coef: f64, out: &mut [f64]) {
        let offsets: Vec<usize> = self
            .sizes
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += w[0] * w[1] + w[1];
                Some(start)
            })
            .collect();
        // gradient of the output with respect to the pre-activations of layer l+1
        let mut delta = vec![coef];
        for l in (0..self.n_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = offsets[l];
            let input = &cache.activations[l];
            for j in 0..fan_out {
                let row = &mut out[offset + j * fan_in..offset + (j + 1) * fan_in];
                for (o, x) in row.iter_mut().zip(input) {
                    *o += delta[j] * x;
                }
                out[offset + fan_in * fan_out + j] += delta[j];
            }
            if l > 0 {
                let weights = &params[offset..offset + fan_in * fan_out];
                delta = (0..fan_in)
                    .map(|i| {
                        let back: f64 = (0..fan_out).map(|j| weights[j * fan_in + i] * delta[j]).sum();
                        let a = input[i];
                        back * (1.0 - a * a)
                    })
                    .collect();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::max_rel_err;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_log_prob(spec: &PolicySpec, params: &PolicyParams, obs: &[f64], a: f64) -> Vec<f64> {
        let h = 1e-5;
        (0..params.dim())
            .map(|i| {
                let mut p = params.clone();
                p[i] += h;
                let up = spec.log_prob(&p, obs, a).unwrap();
                p[i] -= 2.0 * h;
                let down = spec.log_prob(&p, obs, a).unwrap();
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn zero_noise_sample_is_mean() {
        let spec = PolicySpec::mlp(3, vec![4], 0.7);
        let params = spec.init_params(&mut ChaCha8Rng::seed_from_u64(1));
        let obs = [0.1, -0.2, 0.3];
        let mu = spec.mean(&params, &obs).unwrap();
        assert_eq!(spec.action_from_noise(&params, &obs, 0.0).unwrap(), mu);
    }

    #[test]
    fn gaussian_sample_mean_matches() {
        let spec = PolicySpec::linear(2, 1.5);
        let params = PolicyParams(vec![0.5, -1.0, 0.25]);
        let obs = [1.0, 0.5];
        let mu = spec.mean(&params, &obs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| spec.sample_action(&params, &obs, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - mu).abs() < 3.0 * 1.5 / (n as f64).sqrt());
    }

    #[test]
    fn softmax_uniform_row_is_fair() {
        let spec = PolicySpec::softmax(2, 2);
        let params = PolicyParams::zeros(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| spec.sample_action(&params, &[1.0], &mut rng).unwrap() == 1.0)
            .count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        assert!((spec.log_prob(&params, &[0.0], 1.0).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_log_prob_at_mode() {
        let spec = PolicySpec::linear(1, 1.0);
        let params = PolicyParams(vec![2.0, 1.0]);
        let lp = spec.log_prob(&params, &[1.0], 3.0).unwrap();
        assert!((lp + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        let spec = PolicySpec::mlp(2, vec![3], 0.8);
        let params = spec.init_params(&mut ChaCha8Rng::seed_from_u64(3));
        let obs = [0.4, -0.9];
        let mu = spec.mean(&params, &obs).unwrap();
        // trapezoid rule over ±10σ
        let n = 20_000;
        let (lo, hi) = (mu - 8.0, mu + 8.0);
        let h = (hi - lo) / n as f64;
        let integral: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * spec.log_prob(&params, &obs, lo + i as f64 * h).unwrap().exp()
            })
            .sum::<f64>()
            * h;
        assert!((integral - 1.0).abs() < 1e-4, "{integral}");
    }

    #[test]
    fn linear_score_vanishes_at_mean() {
        let spec = PolicySpec::linear(2, 1.0);
        let params = PolicyParams(vec![0.3, -0.7, 0.1]);
        let obs = [1.0, 2.0];
        let mu = spec.mean(&params, &obs).unwrap();
        let g = spec.score(&params, &obs, mu).unwrap();
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn linear_score_hand_value() {
        // θ = (1, 0) with φ(s) = (s, 1) = (1, 1): μ = 1, a = 2 → (a-μ)φ/σ² = (1, 1)
        let spec = PolicySpec::linear(1, 1.0);
        let params = PolicyParams(vec![1.0, 0.0]);
        let g = spec.score(&params, &[1.0], 2.0).unwrap();
        assert_eq!(g.0, vec![1.0, 1.0]);
        let fd = fd_log_prob(&spec, &params, &[1.0], 2.0);
        assert!(max_rel_err(&g, &fd) <= 1e-6);
    }

    #[test]
    fn mlp_score_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for hidden in [vec![5], vec![8, 8], vec![3, 4, 2]] {
            let spec = PolicySpec::mlp(3, hidden, 0.9);
            for _ in 0..10 {
                let params = spec.init_params(&mut rng);
                let obs: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let a = spec.sample_action(&params, &obs, &mut rng).unwrap();
                let g = spec.score(&params, &obs, a).unwrap();
                let fd = fd_log_prob(&spec, &params, &obs, a);
                assert!(max_rel_err(&g, &fd) <= 1e-5, "{}", max_rel_err(&g, &fd));
            }
        }
    }

    #[test]
    fn softmax_score_matches_finite_differences() {
        let spec = PolicySpec::softmax(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let params = PolicyParams((0..12).map(|_| rng.random_range(-2.0..2.0)).collect());
            let s = rng.random_range(0..3) as f64;
            let a = rng.random_range(0..4) as f64;
            let g = spec.score(&params, &[s], a).unwrap();
            let fd = fd_log_prob(&spec, &params, &[s], a);
            assert!(max_rel_err(&g, &fd) <= 1e-5);
        }
    }

    #[test]
    fn score_has_zero_mean() {
        let spec = PolicySpec::mlp(2, vec![4], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = spec.init_params(&mut rng);
        let obs = [0.5, -0.5];
        let n = 100_000;
        let mut sum = vec![0.0; spec.dim()];
        let mut sumsq = vec![0.0; spec.dim()];
        for _ in 0..n {
            let a = spec.sample_action(&params, &obs, &mut rng).unwrap();
            let g = spec.score(&params, &obs, a).unwrap();
            for i in 0..g.dim() {
                sum[i] += g[i];
                sumsq[i] += g[i] * g[i];
            }
        }
        for i in 0..spec.dim() {
            let mean = sum[i] / n as f64;
            let var = sumsq[i] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!(mean.abs() <= 4.0 * se + 1e-15, "component {i}: {mean} vs se {se}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let spec = PolicySpec::linear(3, 1.0);
        let bad = PolicyParams::zeros(3);
        assert!(matches!(
            spec.log_prob(&bad, &[0.0; 3], 0.0),
            Err(Error::ShapeMismatch { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn mlp_dimensions() {
        assert_eq!(PolicySpec::mlp(4, vec![64], 1.0).dim(), 4 * 64 + 64 + 64 + 1);
        assert_eq!(PolicySpec::mlp(3, vec![8, 8], 1.0).dim(), 32 + 72 + 9);
        assert_eq!(
            PolicySpec::from_name("mlp8x8", 3, 1.0, None).unwrap(),
            PolicySpec::mlp(3, vec![8, 8], 1.0)
        );
        assert!(PolicySpec::from_name("mlp", 3, 1.0, None).is_err());
        assert!(PolicySpec::from_name("softmax", 3, 1.0, None).is_err());
    }

    #[test]
    fn assumption_constant_values() {
        let unit = PolicySpec::linear(1, 1.0);
        assert_eq!(assumption_constants(&unit, 1.0, 1.0).unwrap(), (1.0, 1.0));
        assert_eq!(assumption_constants(&unit, 3.0, 2.0).unwrap(), (6.0, 9.0));
        let wide = PolicySpec::linear(1, 2.0);
        assert_eq!(assumption_constants(&wide, 1.0, 1.0).unwrap(), (0.25, 0.25));
        assert!(matches!(
            assumption_constants(&PolicySpec::mlp(1, vec![2], 1.0), 1.0, 1.0),
            Err(Error::DiagnosticUnavailable(_))
        ));
    }
}
