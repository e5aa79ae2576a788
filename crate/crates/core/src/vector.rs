//! Flat real vectors used for policy parameters and gradient estimates.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Flat parameter vector θ (or ρ for the hyper-distribution).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams(pub Vec<f64>);

/// A gradient estimate of the same dimension as the parameters it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate(pub Vec<f64>);

macro_rules! flat_vector {
    ($name:ident) => {
        impl $name {
            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn norm(&self) -> f64 {
                norm(&self.0)
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

flat_vector!(PolicyParams);
flat_vector!(GradEstimate);

impl GradEstimate {
    /// Rejects NaN/Inf entries; `what` names the producer for the error message.
    pub fn checked(values: Vec<f64>, what: &str) -> Result<Self> {
        if values.iter().all(|x| x.is_finite()) {
            Ok(Self(values))
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Componentwise relative error `|a-b| / (1e-8 + |a| + |b|)`, maximised over entries.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (1e-8 + x.abs() + y.abs()))
        .fold(0.0, f64::max)
}

/// Mean of equally sized vectors using a pairwise tree reduction, so the
/// summation order depends only on the number of inputs.
pub fn pairwise_mean(vectors: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = vectors.len();
    if n == 0 {
        return None;
    }
    let mut sum = pairwise_sum(vectors);
    scale(1.0 / n as f64, &mut sum);
    Some(sum)
}

fn pairwise_sum(vectors: &[Vec<f64>]) -> Vec<f64> {
    match vectors.len() {
        1 => vectors[0].clone(),
        n => {
            let (left, right) = vectors.split_at(n / 2);
            let mut l = pairwise_sum(left);
            let r = pairwise_sum(right);
            axpy(1.0, &r, &mut l);
            l
        }
    }
}
