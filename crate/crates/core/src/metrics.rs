//! Multiplicity-weighted empiricals, total variation distance, expectation
//! estimates, and the Donuts bias suite.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::chain::{ChainSink, JumpChain};
use crate::continuous::ContinuousChain;
use crate::error::{Error, Result};
use crate::model::{seeded_rng, Enumerable};
use crate::models::ExactDistribution;

/// Accumulated multiplicity per dense state index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedEmpirical {
    mass: Vec<u64>,
    total: u64,
}

impl WeightedEmpirical {
    pub fn new(num_states: usize) -> Self {
        Self {
            mass: vec![0; num_states],
            total: 0,
        }
    }

    pub fn for_model<M: Enumerable>(model: &M) -> Result<Self> {
        let n = model.num_states();
        let limit = crate::models::DEFAULT_ENUMERATION_LIMIT;
        if n > limit {
            return Err(Error::Capacity { states: n, limit });
        }
        Ok(Self::new(n as usize))
    }

    pub fn add(&mut self, index: usize, multiplicity: u64) {
        self.mass[index] += multiplicity;
        self.total += multiplicity;
    }

    pub fn mass(&self) -> &[u64] {
        &self.mass
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn probability(&self, index: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.mass[index] as f64 / self.total as f64
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.mass.len()).map(|i| self.probability(i)).collect()
    }

    pub fn merge(&mut self, other: &WeightedEmpirical) -> Result<()> {
        if other.mass.len() != self.mass.len() {
            return Err(Error::Structural(format!(
                "cannot merge empiricals over {} and {} states",
                self.mass.len(),
                other.mass.len()
            )));
        }
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn from_chain<M: Enumerable>(model: &M, chain: &JumpChain<M::State>) -> Result<Self> {
        let mut emp = Self::for_model(model)?;
        for (s, m) in chain.iter() {
            emp.add(model.state_index(s), m);
        }
        Ok(emp)
    }
}

/// Feeds chain entries straight into an empirical without storing them.
pub struct EmpiricalSink<'m, M: Enumerable> {
    model: &'m M,
    pub empirical: WeightedEmpirical,
}

impl<'m, M: Enumerable> EmpiricalSink<'m, M> {
    pub fn new(model: &'m M) -> Result<Self> {
        Ok(Self {
            model,
            empirical: WeightedEmpirical::for_model(model)?,
        })
    }
}

impl<M: Enumerable> ChainSink<M::State> for EmpiricalSink<'_, M> {
    fn record(&mut self, state: &M::State, multiplicity: u64) {
        self.empirical
            .add(self.model.state_index(state), multiplicity);
    }
}

/// `½ Σ |p − q|` over two probability vectors on the same space.
pub fn tvd_probabilities(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Structural(format!(
            "distributions over {} and {} states",
            p.len(),
            q.len()
        )));
    }
    let l1: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

pub fn tvd(empirical: &WeightedEmpirical, exact: &ExactDistribution) -> Result<f64> {
    tvd_probabilities(&empirical.probabilities(), exact.probabilities())
}

/// Multiplicity-weighted mean of `h` over the chain.
pub fn estimate<S>(chain: &JumpChain<S>, mut h: impl FnMut(&S) -> f64) -> Result<f64> {
    if chain.is_empty() {
        return Err(Error::Domain("cannot estimate from an empty chain".into()));
    }
    let sum: f64 = chain.iter().map(|(s, m)| m as f64 * h(s)).sum();
    Ok(sum / chain.original_size() as f64)
}

/// TVD between the unit-mass empirical of replication end states and `exact`.
pub fn starting_distribution<M: Enumerable>(
    model: &M,
    last_states: &[M::State],
    exact: &ExactDistribution,
) -> Result<f64> {
    if last_states.is_empty() {
        return Err(Error::Domain("no replications".into()));
    }
    let mut emp = WeightedEmpirical::for_model(model)?;
    for s in last_states {
        emp.add(model.state_index(s), 1);
    }
    tvd(&emp, exact)
}

/// Per-coordinate reference moments of the Donuts target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DonutsReference {
    pub second: f64,
    pub fourth: f64,
}

pub const DONUTS_ORACLE_DRAWS: u64 = 10_000_000;
const DONUTS_ORACLE_SEED: u64 = 0x5eed_d0e5;

/// Monte Carlo moments over `(μ, θ)` with `μ ~ Normal(μ₀, σ²)` truncated to
/// `μ > 0` and `θ ~ Uniform[0, 2π)`, `X = √μ (cos θ, sin θ)`. Both
/// coordinates share one reference; each draw contributes their average.
pub fn donuts_reference_with(mu0: f64, sigma: f64, draws: u64, seed: u64) -> DonutsReference {
    let mut rng = seeded_rng(seed);
    let (mut s2, mut s4) = (0.0, 0.0);
    for _ in 0..draws {
        let mu = loop {
            let v = mu0 + sigma * rng.sample::<f64, _>(StandardNormal);
            if v > 0.0 {
                break v;
            }
        };
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let r = mu.sqrt();
        let (x1, x2) = (r * theta.cos(), r * theta.sin());
        s2 += 0.5 * (x1 * x1 + x2 * x2);
        s4 += 0.5 * (x1.powi(4) + x2.powi(4));
    }
    DonutsReference {
        second: s2 / draws as f64,
        fourth: s4 / draws as f64,
    }
}

/// [`donuts_reference_with`] at the default draw count, computed once per
/// `(μ₀, σ)` and cached.
pub fn donuts_reference(mu0: f64, sigma: f64) -> DonutsReference {
    type Cache = Mutex<HashMap<(u64, u64), Arc<OnceLock<DonutsReference>>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let slot = {
        let mut map = CACHE
            .get_or_init(Default::default)
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        map.entry((mu0.to_bits(), sigma.to_bits()))
            .or_default()
            .clone()
    };
    *slot.get_or_init(|| donuts_reference_with(mu0, sigma, DONUTS_ORACLE_DRAWS, DONUTS_ORACLE_SEED))
}

/// Weighted running sums of `x`, `x²`, `x⁴` and `1(x > 0)` per coordinate of
/// a 2-D chain.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DonutsMoments {
    total: u64,
    first: [f64; 2],
    second: [f64; 2],
    fourth: [f64; 2],
    positive: [u64; 2],
}

impl ChainSink<[f64]> for DonutsMoments {
    fn record(&mut self, x: &[f64], multiplicity: u64) {
        let m = multiplicity as f64;
        self.total += multiplicity;
        for k in 0..2 {
            let v = x[k];
            let v2 = v * v;
            self.first[k] += m * v;
            self.second[k] += m * v2;
            self.fourth[k] += m * v2 * v2;
            if v > 0.0 {
                self.positive[k] += multiplicity;
            }
        }
    }
}

/// The four bias sums, each `|est(X₁) − ref| + |est(X₂) − ref|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSuite {
    pub first: f64,
    pub second: f64,
    pub fourth: f64,
    pub positive_rate: f64,
}

impl BiasSuite {
    pub fn max(&self) -> f64 {
        self.first
            .max(self.second)
            .max(self.fourth)
            .max(self.positive_rate)
    }
}

impl DonutsMoments {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bias(&self, reference: DonutsReference) -> Result<BiasSuite> {
        if self.total == 0 {
            return Err(Error::Domain("no samples".into()));
        }
        let n = self.total as f64;
        let sum = |f: &dyn Fn(usize) -> f64| (0..2).map(f).sum::<f64>();
        Ok(BiasSuite {
            first: sum(&|k| (self.first[k] / n).abs()),
            second: sum(&|k| (self.second[k] / n - reference.second).abs()),
            fourth: sum(&|k| (self.fourth[k] / n - reference.fourth).abs()),
            positive_rate: sum(&|k| (self.positive[k] as f64 / n - 0.5).abs()),
        })
    }
}

pub fn donuts_bias_suite(chain: &ContinuousChain, mu0: f64, sigma: f64) -> Result<BiasSuite> {
    if chain.dimension() != 2 {
        return Err(Error::Structural(format!(
            "bias suite needs a 2-D chain, got {}",
            chain.dimension()
        )));
    }
    let mut moments = DonutsMoments::default();
    for (x, m) in chain.iter() {
        moments.record(x, m);
    }
    moments.bias(donuts_reference(mu0, sigma))
}
