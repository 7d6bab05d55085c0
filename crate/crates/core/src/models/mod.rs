//! Built-in discrete targets and exact enumeration.

mod qubo;
mod tabular;

pub use qubo::{make_qubo_random, qubo_flip_delta, BitState, QuboModel};
pub use tabular::TabularModel;

use crate::error::{Error, Result};
use crate::model::Enumerable;

/// Largest state space [`exact_distribution`] will enumerate by default.
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 1 << 20;

/// Normalized target probabilities indexed by [`Enumerable::state_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    probs: Vec<f64>,
}

impl ExactDistribution {
    /// Wraps an explicit probability table. Entries must be nonnegative and
    /// sum to one within `1e-9`.
    pub fn from_probabilities(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Structural(
                "probabilities must be nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Structural(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

pub fn exact_distribution<M: Enumerable>(model: &M) -> Result<ExactDistribution> {
    exact_distribution_with_limit(model, DEFAULT_ENUMERATION_LIMIT)
}

/// `π(x) = exp(log π̃(x) − logsumexp)` over every state.
pub fn exact_distribution_with_limit<M: Enumerable>(
    model: &M,
    limit: u128,
) -> Result<ExactDistribution> {
    let states = model.num_states();
    if states > limit {
        return Err(Error::Capacity { states, limit });
    }
    let logw: Vec<f64> = (0..states as usize)
        .map(|i| model.log_weight(&model.state_at(i)))
        .collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Domain("target has no finite log-weight".into()));
    }
    let mut probs: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(ExactDistribution { probs })
}
