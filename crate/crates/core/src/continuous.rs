//! Continuous targets: the Donuts ring density, a Gaussian random-walk
//! Metropolis baseline, and Unbiased PNS over symmetric offset candidates.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::chain::{ChainSink, NullSink};
use crate::error::{Error, Result};
use crate::model::{fill_symmetric_offsets, seeded_rng, ChainRng, ContinuousModel};
use crate::select::{acceptance, select_proportional, MultiplicitySampler};

/// Ring-shaped density on `R²` with `log f = −(x₁² + x₂² − μ₀)² / (2σ²)`.
/// The squared radius is (up to truncation at 0) `Normal(μ₀, σ²)` and the
/// angle is uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DonutsModel {
    pub mu0: f64,
    pub sigma: f64,
}

impl Default for DonutsModel {
    fn default() -> Self {
        Self {
            mu0: 9.0,
            sigma: 0.1,
        }
    }
}

impl DonutsModel {
    pub fn new(mu0: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu0.is_finite() || !sigma.is_finite() {
            return Err(Error::Config(format!(
                "donuts needs finite mu0 and sigma > 0 (got {mu0}, {sigma})"
            )));
        }
        Ok(Self { mu0, sigma })
    }
}

impl ContinuousModel for DonutsModel {
    fn dimension(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let d = r2 - self.mu0;
        -d * d / (2.0 * self.sigma * self.sigma)
    }
}

/// Jump chain over `R^d`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousChain {
    dim: usize,
    coords: Vec<f64>,
    multiplicities: Vec<u64>,
    original_size: u64,
}

impl ContinuousChain {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            multiplicities: Vec::new(),
            original_size: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn jump_size(&self) -> usize {
        self.multiplicities.len()
    }

    pub fn original_size(&self) -> u64 {
        self.original_size
    }

    pub fn is_empty(&self) -> bool {
        self.multiplicities.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], u64)> {
        self.coords
            .chunks_exact(self.dim)
            .zip(self.multiplicities.iter().copied())
    }
}

impl ChainSink<[f64]> for ContinuousChain {
    fn record(&mut self, state: &[f64], multiplicity: u64) {
        debug_assert_eq!(state.len(), self.dim);
        if multiplicity == 0 {
            return;
        }
        self.coords.extend_from_slice(state);
        self.multiplicities.push(multiplicity);
        self.original_size += multiplicity;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousConfig {
    pub budget: u64,
    pub seed: u64,
    /// Original samples run and dropped before recording.
    pub burn_in: u64,
    /// Start state; the origin when `None`.
    pub start: Option<Vec<f64>>,
}

impl ContinuousConfig {
    /// Burn-in defaults to `budget`.
    pub fn new(budget: u64, seed: u64) -> Self {
        Self {
            budget,
            seed,
            burn_in: budget,
            start: None,
        }
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    fn start<M: ContinuousModel>(&self, model: &M) -> Result<Vec<f64>> {
        if self.budget == 0 {
            return Err(Error::Config(
                "original sample budget must be positive".into(),
            ));
        }
        let start = self
            .start
            .clone()
            .unwrap_or_else(|| vec![0.0; model.dimension()]);
        if start.len() != model.dimension() {
            return Err(Error::Structural(format!(
                "start has {} coordinates, model has {}",
                start.len(),
                model.dimension()
            )));
        }
        Ok(start)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContinuousStats {
    pub jump_size: u64,
    pub accepted: u64,
    pub forced_repeats: u64,
    pub stuck_windows: u64,
}

/// Gaussian random-walk Metropolis with per-coordinate step `step_std`.
pub struct MhContinuous<'m, M: ContinuousModel> {
    model: &'m M,
    step_std: f64,
    state: Vec<f64>,
    log_density: f64,
    proposal: Vec<f64>,
    rng: ChainRng,
    stats: ContinuousStats,
}

impl<'m, M: ContinuousModel> MhContinuous<'m, M> {
    pub fn new(model: &'m M, step_std: f64, start: Vec<f64>, rng: ChainRng) -> Result<Self> {
        if !(step_std > 0.0) {
            return Err(Error::Config(format!(
                "step std must be positive, got {step_std}"
            )));
        }
        Ok(Self {
            model,
            step_std,
            log_density: model.log_density(&start),
            proposal: start.clone(),
            state: start,
            rng,
            stats: ContinuousStats::default(),
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn stats(&self) -> ContinuousStats {
        self.stats
    }

    pub fn advance<S: ChainSink<[f64]>>(&mut self, budget: u64, sink: &mut S) {
        let mut run = 0u64;
        for _ in 0..budget {
            run += 1;
            for (p, x) in self.proposal.iter_mut().zip(&self.state) {
                *p = x + self.step_std * self.rng.sample::<f64, _>(StandardNormal);
            }
            let proposed = self.model.log_density(&self.proposal);
            let u = self.rng.random::<f64>();
            if u < acceptance(proposed - self.log_density) {
                sink.record(&self.state, run);
                self.stats.jump_size += 1;
                run = 0;
                std::mem::swap(&mut self.state, &mut self.proposal);
                self.log_density = proposed;
                self.stats.accepted += 1;
            }
        }
        if run > 0 {
            sink.record(&self.state, run);
            self.stats.jump_size += 1;
        }
    }
}

pub fn run_mh_continuous<M: ContinuousModel, S: ChainSink<[f64]>>(
    model: &M,
    step_std: f64,
    config: &ContinuousConfig,
    sink: &mut S,
) -> Result<ContinuousStats> {
    let start = config.start(model)?;
    let mut chain = MhContinuous::new(model, step_std, start, seeded_rng(config.seed))?;
    chain.advance(config.burn_in, &mut NullSink);
    let before = chain.stats();
    chain.advance(config.budget, sink);
    Ok(diff(chain.stats(), before))
}

/// Unbiased PNS over `2 · num_pairs` candidates `x ± δⱼ`. The offsets are
/// redrawn every `window` original samples and the proposal is uniform over
/// the candidates, so the restricted kernel is symmetric.
pub struct PnsContinuous<'m, M: ContinuousModel> {
    model: &'m M,
    num_pairs: usize,
    window: u64,
    left: u64,
    state: Vec<f64>,
    log_density: f64,
    offsets: Vec<f64>,
    candidates: Vec<f64>,
    candidate_log_density: Vec<f64>,
    weights: Vec<f64>,
    rng: ChainRng,
    multiplicity: MultiplicitySampler,
    stats: ContinuousStats,
}

impl<'m, M: ContinuousModel> PnsContinuous<'m, M> {
    pub fn new(
        model: &'m M,
        num_pairs: usize,
        window: u64,
        start: Vec<f64>,
        mut rng: ChainRng,
    ) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidScheme("window L0 must be positive".into()));
        }
        let dim = model.dimension();
        let mut offsets = Vec::new();
        fill_symmetric_offsets(dim, num_pairs, &mut rng, &mut offsets)?;
        let count = 2 * num_pairs;
        Ok(Self {
            model,
            num_pairs,
            window,
            left: window,
            log_density: model.log_density(&start),
            state: start,
            offsets,
            candidates: vec![0.0; count * dim],
            candidate_log_density: vec![0.0; count],
            weights: vec![0.0; count],
            rng,
            multiplicity: MultiplicitySampler::default(),
            stats: ContinuousStats::default(),
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn stats(&self) -> ContinuousStats {
        self.stats
    }

    /// Current window's offsets, `2 · num_pairs` rows of `dimension` values.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    fn escape_probability(&mut self) -> f64 {
        let dim = self.state.len();
        let q = 1.0 / (2 * self.num_pairs) as f64;
        let mut total = 0.0;
        for (j, delta) in self.offsets.chunks_exact(dim).enumerate() {
            let y = &mut self.candidates[j * dim..(j + 1) * dim];
            for ((yk, xk), dk) in y.iter_mut().zip(&self.state).zip(delta) {
                *yk = xk + dk;
            }
            let ly = self.model.log_density(y);
            self.candidate_log_density[j] = ly;
            let a = q * acceptance(ly - self.log_density);
            self.weights[j] = a;
            total += a;
        }
        total.min(1.0)
    }

    pub fn advance<S: ChainSink<[f64]>>(&mut self, budget: u64, sink: &mut S) -> Result<()> {
        let dim = self.state.len();
        let mut remaining = budget;
        while remaining > 0 {
            if self.left == 0 {
                fill_symmetric_offsets(dim, self.num_pairs, &mut self.rng, &mut self.offsets)?;
                self.left = self.window;
            }
            let p = self.escape_probability();
            let holding = if p > 0.0 {
                self.multiplicity.draw(p, &mut self.rng)?
            } else {
                self.stats.stuck_windows += 1;
                log::debug!("no exit mass at {:?}; holding for the window", self.state);
                u64::MAX
            };
            let (take, moving) = if holding <= self.left {
                (holding, true)
            } else {
                (self.left, false)
            };
            if take > remaining {
                sink.record(&self.state, remaining);
                self.stats.jump_size += 1;
                self.left -= remaining;
                return Ok(());
            }
            sink.record(&self.state, take);
            self.stats.jump_size += 1;
            remaining -= take;
            self.left -= take;
            if moving {
                let j = select_proportional(&self.weights, &mut self.rng)?;
                self.state
                    .copy_from_slice(&self.candidates[j * dim..(j + 1) * dim]);
                self.log_density = self.candidate_log_density[j];
                self.stats.accepted += 1;
            } else {
                self.stats.forced_repeats += 1;
            }
        }
        Ok(())
    }
}

pub fn run_unbiased_pns_continuous<M: ContinuousModel, S: ChainSink<[f64]>>(
    model: &M,
    num_pairs: usize,
    window: u64,
    config: &ContinuousConfig,
    sink: &mut S,
) -> Result<ContinuousStats> {
    let start = config.start(model)?;
    let mut chain = PnsContinuous::new(model, num_pairs, window, start, seeded_rng(config.seed))?;
    chain.advance(config.burn_in, &mut NullSink)?;
    let before = chain.stats();
    chain.advance(config.budget, sink)?;
    Ok(diff(chain.stats(), before))
}

fn diff(after: ContinuousStats, before: ContinuousStats) -> ContinuousStats {
    ContinuousStats {
        jump_size: after.jump_size - before.jump_size,
        accepted: after.accepted - before.accepted,
        forced_repeats: after.forced_repeats - before.forced_repeats,
        stuck_windows: after.stuck_windows - before.stuck_windows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_peaks_on_ring() {
        let m = DonutsModel::default();
        assert_eq!(m.log_density(&[3.0, 0.0]), 0.0);
        assert_eq!(m.log_density(&[0.0, -3.0]), 0.0);
        let s = 0.5f64.sqrt() * 3.0;
        assert!(m.log_density(&[s, s]).abs() < 1e-12);
        assert!(m.log_density(&[2.9, 0.0]) < 0.0);
        assert!(m.log_density(&[0.0, 0.0]).is_finite());
        assert!(DonutsModel::new(9.0, 0.0).is_err());
    }

    #[test]
    fn budgets_exact_and_replayable() {
        let m = DonutsModel::default();
        for budget in [1, 5, 999, 1000, 1001, 54_321] {
            let cfg = ContinuousConfig::new(budget, budget);
            let mut a = ContinuousChain::new(2);
            run_unbiased_pns_continuous(&m, 25, 1000, &cfg, &mut a).unwrap();
            assert_eq!(a.original_size(), budget);
            let mut b = ContinuousChain::new(2);
            run_unbiased_pns_continuous(&m, 25, 1000, &cfg, &mut b).unwrap();
            assert_eq!(a, b);
            let mut c = ContinuousChain::new(2);
            run_mh_continuous(&m, 1.0, &cfg, &mut c).unwrap();
            assert_eq!(c.original_size(), budget);
            let mut d = ContinuousChain::new(2);
            run_mh_continuous(&m, 1.0, &cfg, &mut d).unwrap();
            assert_eq!(c, d);
        }
    }

    #[test]
    fn fifty_candidates_paired() {
        let m = DonutsModel::default();
        let chain = PnsContinuous::new(&m, 25, 10, vec![3.0, 0.0], seeded_rng(1)).unwrap();
        let offsets = chain.offsets();
        assert_eq!(offsets.len(), 50 * 2);
        for pair in offsets.chunks_exact(4) {
            assert_eq!(pair[0], -pair[2]);
            assert_eq!(pair[1], -pair[3]);
        }
    }

    #[test]
    fn candidates_are_reversible() {
        // y = x + δ has x = y + (−δ) among its own candidates.
        let m = DonutsModel::default();
        let chain = PnsContinuous::new(&m, 25, 10, vec![1.0, 2.0], seeded_rng(2)).unwrap();
        let rows: Vec<&[f64]> = chain.offsets().chunks_exact(2).collect();
        for d in &rows {
            assert!(rows.iter().any(|e| e[0] == -d[0] && e[1] == -d[1]));
        }
    }

    #[test]
    fn offsets_fixed_within_window_and_redrawn_after() {
        let m = DonutsModel::default();
        let mut chain = PnsContinuous::new(&m, 25, 100, vec![3.0, 0.0], seeded_rng(3)).unwrap();
        let first = chain.offsets().to_vec();
        chain.advance(60, &mut NullSink).unwrap();
        assert_eq!(chain.offsets(), &first[..]);
        chain.advance(40, &mut NullSink).unwrap();
        assert_eq!(chain.offsets(), &first[..]);
        chain.advance(1, &mut NullSink).unwrap();
        assert_ne!(chain.offsets(), &first[..]);
    }

    #[test]
    fn repeats_only_at_window_ends() {
        let m = DonutsModel::default();
        let window = 1000;
        let cfg = ContinuousConfig::new(200_000, 4).with_burn_in(0);
        let mut chain = ContinuousChain::new(2);
        run_unbiased_pns_continuous(&m, 25, window, &cfg, &mut chain).unwrap();
        let mut t = 0u64;
        for k in 0..chain.jump_size() {
            let mk = chain.multiplicities()[k];
            assert_eq!(t / window, (t + mk - 1) / window);
            if k + 1 < chain.jump_size() && chain.state(k) == chain.state(k + 1) {
                assert_eq!((t + mk) % window, 0);
            }
            t += mk;
        }
    }

    #[test]
    fn mh_accepts_uphill() {
        // any first step away from the origin moves toward the ring
        let m = DonutsModel::default();
        for seed in 0..100 {
            let mut chain = MhContinuous::new(&m, 0.1, vec![0.0, 0.0], seeded_rng(seed)).unwrap();
            chain.advance(1, &mut NullSink);
            assert_eq!(chain.stats().accepted, 1);
        }
    }

    #[test]
    fn flat_density_never_sticks() {
        struct Flat;
        impl ContinuousModel for Flat {
            fn dimension(&self) -> usize {
                3
            }
            fn log_density(&self, _: &[f64]) -> f64 {
                0.0
            }
        }
        let cfg = ContinuousConfig::new(1000, 6);
        let mut chain = ContinuousChain::new(3);
        let stats = run_unbiased_pns_continuous(&Flat, 2, 50, &cfg, &mut chain).unwrap();
        assert!(chain.multiplicities().iter().all(|&m| m == 1));
        assert_eq!(stats.jump_size, 1000);
    }

    #[test]
    fn zero_exit_mass_holds_the_window() {
        struct Spike;
        impl ContinuousModel for Spike {
            fn dimension(&self) -> usize {
                1
            }
            fn log_density(&self, x: &[f64]) -> f64 {
                if x[0] == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
        let cfg = ContinuousConfig::new(250, 7).with_burn_in(0);
        let mut chain = ContinuousChain::new(1);
        let stats = run_unbiased_pns_continuous(&Spike, 3, 100, &cfg, &mut chain).unwrap();
        assert_eq!(chain.multiplicities(), &[100, 100, 50]);
        assert_eq!(stats.stuck_windows, 3);
        assert_eq!(stats.forced_repeats, 2);
    }
}
