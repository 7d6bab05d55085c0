//! Discrete-state chains: Metropolis-Hastings, Rejection-Free, Basic PNS,
//! the two alternating-chain variants and Unbiased PNS.
//!
//! Every sampler produces exactly `budget` original samples. Windowed
//! methods switch their active move set every `scheme.window` original
//! samples; a rejection-free step whose holding time would run past the end
//! of the window holds for the rest of the window instead and the next
//! window starts from the same state, so one entry may repeat its
//! predecessor across a boundary.

use rand::Rng;

use crate::chain::{ChainSink, JumpChain, NullSink};
use crate::error::{Error, Result};
use crate::model::{seeded_rng, ChainRng, DiscreteModel, PartialNeighborScheme, SchemeKind};
use crate::select::{
    acceptance, fill_subset_weights, fill_transition_weights, select_proportional,
    MultiplicitySampler,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mh,
    Rf,
    BasicPns,
    MhAlternating,
    RfAlternating,
    UnbiasedPns,
    UnbiasedPnsNaive,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Mh,
        Method::Rf,
        Method::BasicPns,
        Method::MhAlternating,
        Method::RfAlternating,
        Method::UnbiasedPns,
        Method::UnbiasedPnsNaive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Mh => "mh",
            Method::Rf => "rf",
            Method::BasicPns => "basic_pns",
            Method::MhAlternating => "mh_alternating",
            Method::RfAlternating => "rf_alternating",
            Method::UnbiasedPns => "unbiased_pns",
            Method::UnbiasedPnsNaive => "unbiased_pns_naive",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Methods that draw one proposal per original sample.
    pub fn is_metropolis(&self) -> bool {
        matches!(
            self,
            Method::Mh | Method::MhAlternating | Method::UnbiasedPnsNaive
        )
    }

    fn is_windowed(&self) -> bool {
        matches!(
            self,
            Method::MhAlternating
                | Method::RfAlternating
                | Method::UnbiasedPns
                | Method::UnbiasedPnsNaive
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurnIn {
    None,
    /// Run the sampler for this many original samples and drop them.
    Discard(u64),
    /// Run this many Optimization PNS steps from the random start.
    Optimize(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub method: Method,
    /// Ignored by `Mh` and `Rf`. For `BasicPns` only the set size matters.
    pub scheme: PartialNeighborScheme,
    pub budget: u64,
    pub seed: u64,
    pub burn_in: BurnIn,
}

impl SamplerConfig {
    /// Defaults to a discard burn-in of `budget` samples.
    pub fn new(method: Method, scheme: PartialNeighborScheme, budget: u64, seed: u64) -> Self {
        Self {
            method,
            scheme,
            budget,
            seed,
            burn_in: BurnIn::Discard(budget),
        }
    }

    pub fn with_burn_in(mut self, burn_in: BurnIn) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate<M: DiscreteModel>(&self, model: &M) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config(
                "original sample budget must be positive".into(),
            ));
        }
        let dim = model.dimension();
        match self.method {
            Method::Mh | Method::Rf => Ok(()),
            Method::BasicPns => {
                let n = self.scheme.kind.set_size(model.neighbor_count());
                if n == 0 || n > model.neighbor_count() {
                    return Err(Error::InvalidScheme(format!(
                        "basic PNS set size {n} outside 1..={}",
                        model.neighbor_count()
                    )));
                }
                Ok(())
            }
            Method::MhAlternating | Method::RfAlternating => {
                if matches!(self.scheme.kind, SchemeKind::Random { .. }) {
                    return Err(Error::InvalidScheme(format!(
                        "{} cycles through fixed sets; use a systematic scheme",
                        self.method.name()
                    )));
                }
                self.scheme.validate(dim)
            }
            Method::UnbiasedPns | Method::UnbiasedPnsNaive => self.scheme.validate(dim),
        }
    }
}

/// Counters collected while a chain runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Entries handed to the sink.
    pub jump_size: u64,
    /// Windows that ended with a forced hold at the current state.
    pub forced_repeats: u64,
    /// Windows in which the current state had no exit mass.
    pub stuck_windows: u64,
    pub capped_multiplicities: u64,
}

/// Active move set plus the number of transitions left in the window.
#[derive(Debug, Clone)]
struct Window {
    scheme: PartialNeighborScheme,
    dimension: usize,
    index: usize,
    moves: Vec<usize>,
    left: u64,
}

impl Window {
    fn new<R: Rng + ?Sized>(
        scheme: PartialNeighborScheme,
        dimension: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let moves = scheme.index_set(dimension, 0, rng)?;
        Ok(Self {
            scheme,
            dimension,
            index: 0,
            moves,
            left: scheme.window,
        })
    }

    /// Unlimited single-set window over every move.
    fn unbounded(dimension: usize) -> Self {
        Self {
            scheme: PartialNeighborScheme::full(u64::MAX),
            dimension,
            index: 0,
            moves: (0..dimension).collect(),
            left: u64::MAX,
        }
    }

    fn roll<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.left > 0 {
            return Ok(());
        }
        self.index += 1;
        if !matches!(self.scheme.kind, SchemeKind::Full) {
            self.moves = self.scheme.index_set(self.dimension, self.index, rng)?;
        }
        self.left = self.scheme.window;
        Ok(())
    }
}

/// A single chain. Holds the current state, the random stream, and the
/// window position, so [`Sampler::advance`] may be called repeatedly to
/// extend the same chain.
pub struct Sampler<'m, M: DiscreteModel> {
    model: &'m M,
    method: Method,
    basic_set_size: usize,
    state: M::State,
    rng: ChainRng,
    multiplicity: MultiplicitySampler,
    window: Window,
    weights: Vec<f64>,
    scratch: Vec<usize>,
    next: M::State,
    stats: RunStats,
}

impl<'m, M: DiscreteModel> Sampler<'m, M> {
    pub fn new(
        model: &'m M,
        method: Method,
        scheme: PartialNeighborScheme,
        start: M::State,
        mut rng: ChainRng,
    ) -> Result<Self> {
        let dim = model.dimension();
        let window = if method.is_windowed() {
            scheme.validate(dim)?;
            Window::new(scheme, dim, &mut rng)?
        } else {
            Window::unbounded(dim)
        };
        Ok(Self {
            model,
            method,
            basic_set_size: scheme.kind.set_size(model.neighbor_count()),
            next: start.clone(),
            state: start,
            rng,
            multiplicity: MultiplicitySampler::default(),
            window,
            weights: Vec::with_capacity(dim),
            scratch: Vec::with_capacity(dim),
            stats: RunStats::default(),
        })
    }

    pub fn state(&self) -> &M::State {
        &self.state
    }

    pub fn stats(&self) -> RunStats {
        RunStats {
            capped_multiplicities: self.multiplicity.capped_draws(),
            ..self.stats
        }
    }

    pub fn into_parts(self) -> (M::State, ChainRng) {
        (self.state, self.rng)
    }

    /// Extend the chain by exactly `budget` original samples.
    pub fn advance<S: ChainSink<M::State>>(&mut self, budget: u64, sink: &mut S) -> Result<()> {
        if budget == 0 {
            return Ok(());
        }
        match self.method {
            Method::Mh | Method::MhAlternating | Method::UnbiasedPnsNaive => {
                self.advance_metropolis(budget, sink)
            }
            Method::Rf | Method::RfAlternating | Method::UnbiasedPns => {
                self.advance_rejection_free(budget, sink)
            }
            Method::BasicPns => self.advance_basic_pns(budget, sink),
        }
    }

    fn emit<S: ChainSink<M::State>>(&mut self, sink: &mut S, multiplicity: u64) {
        sink.record(&self.state, multiplicity);
        self.stats.jump_size += 1;
    }

    /// Draws a move from `Q_i(x, ·)` over the active set.
    fn propose(&mut self) -> Option<(usize, f64)> {
        let moves = &self.window.moves;
        let model = self.model;
        if model.uniform_proposal() {
            let mv = moves[self.rng.random_range(0..moves.len())];
            return Some((mv, 1.0 / moves.len() as f64));
        }
        let mass: f64 = moves
            .iter()
            .map(|&c| model.proposal_weight(&self.state, c))
            .sum();
        if mass <= 0.0 {
            return None;
        }
        let target = self.rng.random::<f64>() * mass;
        let mut acc = 0.0;
        let mut chosen = None;
        for &c in moves {
            let q = model.proposal_weight(&self.state, c);
            if q <= 0.0 {
                continue;
            }
            acc += q;
            chosen = Some((c, q / mass));
            if target < acc {
                break;
            }
        }
        chosen
    }

    /// `log[π(y)Q_i(y,x) / π(x)Q_i(x,y)]` for the proposed move.
    fn metropolis_log_ratio(&mut self, mv: usize, forward: f64) -> f64 {
        let delta = self.model.log_ratio(&self.state, mv);
        if self.model.uniform_proposal() {
            return delta;
        }
        self.next.clone_from(&self.state);
        self.model.apply_move(&mut self.next, mv);
        let moves = &self.window.moves;
        let mass: f64 = moves
            .iter()
            .map(|&c| self.model.proposal_weight(&self.next, c))
            .sum();
        let reverse = self.model.proposal_weight(&self.next, mv) / mass;
        delta + (reverse / forward).ln()
    }

    fn advance_metropolis<S: ChainSink<M::State>>(
        &mut self,
        budget: u64,
        sink: &mut S,
    ) -> Result<()> {
        let mut run = 0u64;
        for _ in 0..budget {
            self.window.roll(&mut self.rng)?;
            run += 1;
            let proposal = self.propose();
            // the uniform is drawn even when there is nothing to propose so
            // the stream stays aligned with the proposal count
            let u = self.rng.random::<f64>();
            self.window.left -= 1;
            let Some((mv, forward)) = proposal else {
                continue;
            };
            let log_ratio = self.metropolis_log_ratio(mv, forward);
            if u < acceptance(log_ratio) {
                self.emit(sink, run);
                run = 0;
                self.model.apply_move(&mut self.state, mv);
            }
        }
        if run > 0 {
            self.emit(sink, run);
        }
        Ok(())
    }

    fn advance_rejection_free<S: ChainSink<M::State>>(
        &mut self,
        budget: u64,
        sink: &mut S,
    ) -> Result<()> {
        let windowed = self.method.is_windowed();
        let mut remaining = budget;
        while remaining > 0 {
            self.window.roll(&mut self.rng)?;
            let p = fill_transition_weights(
                self.model,
                &self.state,
                &self.window.moves,
                &mut self.weights,
            );
            let holding = if p > 0.0 {
                self.multiplicity.draw(p, &mut self.rng)?
            } else if windowed {
                self.stats.stuck_windows += 1;
                u64::MAX
            } else {
                return Err(Error::Domain(format!(
                    "state {:?} has no exit mass under the full neighborhood",
                    self.state
                )));
            };
            let left = self.window.left;
            let (take, moving) = if holding <= left {
                (holding, true)
            } else {
                (left, false)
            };
            if take > remaining {
                // memoryless: the unused part of the hold is redrawn later
                self.emit(sink, remaining);
                self.window.left -= remaining;
                return Ok(());
            }
            self.emit(sink, take);
            remaining -= take;
            self.window.left -= take;
            if moving {
                let j = select_proportional(&self.weights, &mut self.rng)?;
                self.model.apply_move(&mut self.state, self.window.moves[j]);
            } else {
                self.stats.forced_repeats += 1;
            }
        }
        Ok(())
    }

    fn advance_basic_pns<S: ChainSink<M::State>>(
        &mut self,
        budget: u64,
        sink: &mut S,
    ) -> Result<()> {
        let mut remaining = budget;
        while remaining > 0 {
            self.draw_valid_subset();
            let p = fill_subset_weights(self.model, &self.state, &self.scratch, &mut self.weights);
            let holding = self.multiplicity.draw(p, &mut self.rng)?;
            if holding > remaining {
                self.emit(sink, remaining);
                return Ok(());
            }
            self.emit(sink, holding);
            remaining -= holding;
            let j = select_proportional(&self.weights, &mut self.rng)?;
            self.model.apply_move(&mut self.state, self.scratch[j]);
        }
        Ok(())
    }

    fn draw_valid_subset(&mut self) {
        draw_valid_subset(
            self.model,
            &self.state,
            self.basic_set_size,
            &mut self.rng,
            &mut self.scratch,
        );
    }
}

/// Uniform random `set_size`-subset (sorted) of the moves valid at `state`,
/// written into `out`. Smaller when fewer moves are valid.
pub(crate) fn draw_valid_subset<M: DiscreteModel, R: Rng + ?Sized>(
    model: &M,
    state: &M::State,
    set_size: usize,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    out.clear();
    out.extend((0..model.dimension()).filter(|&c| model.is_valid_move(state, c)));
    let n = set_size.min(out.len());
    // partial Fisher-Yates
    for i in 0..n {
        let j = rng.random_range(i..out.len());
        out.swap(i, j);
    }
    out.truncate(n);
    out.sort_unstable();
}

/// Run a configured chain from a uniformly random start into `sink`,
/// applying the configured burn-in first.
pub fn run_into<M: DiscreteModel, S: ChainSink<M::State>>(
    model: &M,
    config: &SamplerConfig,
    sink: &mut S,
) -> Result<RunStats> {
    config.validate(model)?;
    let mut rng = seeded_rng(config.seed);
    let mut start = model.random_state(&mut rng);
    if let BurnIn::Optimize(steps) = config.burn_in {
        let set_size = crate::optim::default_opt_set_size(model, &config.scheme);
        let opt = crate::optim::opt_pns_from(model, set_size, steps, start, &mut rng)?;
        start = opt.final_state;
    }
    run_from(model, config, start, rng, sink)
}

/// Run from an explicit start state with a caller-provided stream. A
/// `Discard` burn-in extends the same chain before recording.
pub fn run_from<M: DiscreteModel, S: ChainSink<M::State>>(
    model: &M,
    config: &SamplerConfig,
    start: M::State,
    rng: ChainRng,
    sink: &mut S,
) -> Result<RunStats> {
    config.validate(model)?;
    let mut sampler = Sampler::new(model, config.method, config.scheme, start, rng)?;
    if let BurnIn::Discard(count) = config.burn_in {
        sampler.advance(count, &mut NullSink)?;
    }
    let before = sampler.stats();
    sampler.advance(config.budget, sink)?;
    let after = sampler.stats();
    Ok(RunStats {
        jump_size: after.jump_size - before.jump_size,
        forced_repeats: after.forced_repeats - before.forced_repeats,
        stuck_windows: after.stuck_windows - before.stuck_windows,
        capped_multiplicities: after.capped_multiplicities,
    })
}

pub fn run<M: DiscreteModel>(model: &M, config: &SamplerConfig) -> Result<JumpChain<M::State>> {
    let mut chain = JumpChain::new();
    run_into(model, config, &mut chain)?;
    Ok(chain)
}

fn run_as<M: DiscreteModel>(
    model: &M,
    config: &SamplerConfig,
    method: Method,
) -> Result<JumpChain<M::State>> {
    let config = SamplerConfig {
        method,
        ..config.clone()
    };
    run(model, &config)
}

/// Metropolis-Hastings; equal consecutive samples are merged.
pub fn run_mh<M: DiscreteModel>(model: &M, config: &SamplerConfig) -> Result<JumpChain<M::State>> {
    run_as(model, config, Method::Mh)
}

/// Rejection-Free over the full neighborhood.
pub fn run_rf<M: DiscreteModel>(model: &M, config: &SamplerConfig) -> Result<JumpChain<M::State>> {
    run_as(model, config, Method::Rf)
}

/// Basic PNS: a fresh random subset of the valid moves at every jump. Does
/// not target π in general.
pub fn run_basic_pns<M: DiscreteModel>(
    model: &M,
    config: &SamplerConfig,
) -> Result<JumpChain<M::State>> {
    run_as(model, config, Method::BasicPns)
}

pub fn run_mh_alternating<M: DiscreteModel>(
    model: &M,
    config: &SamplerConfig,
) -> Result<JumpChain<M::State>> {
    run_as(model, config, Method::MhAlternating)
}

pub fn run_rf_alternating<M: DiscreteModel>(
    model: &M,
    config: &SamplerConfig,
) -> Result<JumpChain<M::State>> {
    run_as(model, config, Method::RfAlternating)
}

pub fn run_unbiased_pns<M: DiscreteModel>(
    model: &M,
    config: &SamplerConfig,
) -> Result<JumpChain<M::State>> {
    run_as(model, config, Method::UnbiasedPns)
}

/// One restricted Metropolis proposal per original sample; the reference
/// the rejection-free Unbiased PNS must agree with.
pub fn run_unbiased_pns_naive<M: DiscreteModel>(
    model: &M,
    config: &SamplerConfig,
) -> Result<JumpChain<M::State>> {
    run_as(model, config, Method::UnbiasedPnsNaive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::LastState;
    use crate::models::{make_qubo_random, TabularModel};

    fn cfg(method: Method, scheme: PartialNeighborScheme, budget: u64, seed: u64) -> SamplerConfig {
        SamplerConfig::new(method, scheme, budget, seed)
    }

    #[test]
    fn budgets_are_exact() {
        let tri = TabularModel::triangle();
        let cube = TabularModel::hypercube16();
        let qubo = make_qubo_random(10, 3.0, 1).unwrap();
        for method in Method::ALL {
            for budget in [1, 2, 7, 99, 1000, 12345] {
                let scheme = match method {
                    Method::BasicPns => PartialNeighborScheme::random(1, 1),
                    _ => PartialNeighborScheme::systematic(1, 13),
                };
                let c = cfg(method, scheme, budget, budget);
                assert_eq!(run(&tri, &c).unwrap().original_size(), budget);
                let c = cfg(method, PartialNeighborScheme::systematic(2, 7), budget, 3);
                assert_eq!(run(&cube, &c).unwrap().original_size(), budget);
                let c = cfg(method, PartialNeighborScheme::systematic(4, 50), budget, 4);
                assert_eq!(run(&qubo, &c).unwrap().original_size(), budget);
            }
        }
    }

    #[test]
    fn seeds_replay() {
        let cube = TabularModel::hypercube16();
        for method in Method::ALL {
            let c = cfg(method, PartialNeighborScheme::systematic(2, 10), 5000, 77);
            assert_eq!(run(&cube, &c).unwrap(), run(&cube, &c).unwrap());
        }
    }

    #[test]
    fn rf_never_repeats() {
        let tri = TabularModel::triangle();
        let c = cfg(Method::Rf, PartialNeighborScheme::full(1), 20_000, 5);
        let chain = run_rf(&tri, &c).unwrap();
        assert!(chain.states().windows(2).all(|w| w[0] != w[1]));
        let c = cfg(
            Method::BasicPns,
            PartialNeighborScheme::random(1, 1),
            20_000,
            5,
        );
        let chain = run_basic_pns(&tri, &c).unwrap();
        assert!(chain.states().windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn mh_output_is_compressed() {
        let tri = TabularModel::triangle();
        let c = cfg(Method::Mh, PartialNeighborScheme::full(1), 20_000, 6);
        let chain = run_mh(&tri, &c).unwrap();
        assert!(chain.states().windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn uphill_always_accepted() {
        // From A every proposal goes uphill, so MH must leave A immediately.
        let tri = TabularModel::triangle();
        for seed in 0..200 {
            let c =
                cfg(Method::Mh, PartialNeighborScheme::full(1), 2, seed).with_burn_in(BurnIn::None);
            let mut s = Sampler::new(&tri, Method::Mh, c.scheme, 0, seeded_rng(seed)).unwrap();
            let mut chain = JumpChain::new();
            s.advance(2, &mut chain).unwrap();
            assert_eq!(chain.multiplicities()[0], 1);
            assert_ne!(chain.states()[1], 0);
        }
    }

    #[test]
    fn repeats_only_at_window_boundaries() {
        let cube = TabularModel::hypercube16();
        let window = 37;
        let scheme = PartialNeighborScheme::systematic(2, window);
        let c = cfg(Method::UnbiasedPns, scheme, 50_000, 8).with_burn_in(BurnIn::None);
        let chain = run(&cube, &c).unwrap();
        let mut t = 0u64;
        for k in 0..chain.jump_size() {
            let m = chain.multiplicities()[k];
            if k + 1 < chain.jump_size() && chain.states()[k] == chain.states()[k + 1] {
                // a forced hold finishes exactly at a window boundary
                assert_eq!((t + m) % window, 0, "entry {k}");
            }
            // no entry straddles a boundary
            assert!(t / window == (t + m - 1) / window, "entry {k}");
            t += m;
        }
    }

    #[test]
    fn full_scheme_single_set_matches_rf_structure() {
        let cube = TabularModel::hypercube16();
        let c = cfg(
            Method::UnbiasedPns,
            PartialNeighborScheme::full(100),
            100_000,
            9,
        )
        .with_burn_in(BurnIn::None);
        let mut sampler = Sampler::new(&cube, c.method, c.scheme, 0, seeded_rng(9)).unwrap();
        let mut chain = JumpChain::new();
        sampler.advance(c.budget, &mut chain).unwrap();
        // with every move active the only repeats are window-end holds
        let repeats = chain.states().windows(2).filter(|w| w[0] == w[1]).count() as u64;
        assert!(repeats <= sampler.stats().forced_repeats);
        assert!(sampler.stats().forced_repeats <= c.budget / 100);
    }

    #[test]
    fn window_of_one_switches_every_step() {
        // With L0 = 1 and single-edge sets on the triangle, each sample uses
        // the next edge in turn.
        let tri = TabularModel::triangle();
        let c = cfg(
            Method::UnbiasedPnsNaive,
            PartialNeighborScheme::systematic(1, 1),
            30,
            1,
        );
        let mut s = Sampler::new(&tri, c.method, c.scheme, 0, seeded_rng(1)).unwrap();
        for i in 0..6 {
            s.advance(1, &mut NullSink).unwrap();
            assert_eq!(s.window.index, i);
            assert_eq!(s.window.moves, vec![i % 3]);
        }
    }

    #[test]
    fn alternating_rejects_random_scheme() {
        let cube = TabularModel::hypercube16();
        let c = cfg(
            Method::RfAlternating,
            PartialNeighborScheme::random(2, 5),
            10,
            1,
        );
        assert!(matches!(c.validate(&cube), Err(Error::InvalidScheme(_))));
        let c = cfg(Method::Rf, PartialNeighborScheme::full(1), 0, 1);
        assert!(matches!(c.validate(&cube), Err(Error::Config(_))));
        let c = cfg(Method::BasicPns, PartialNeighborScheme::random(5, 1), 10, 1);
        assert!(c.validate(&cube).is_err());
    }

    #[test]
    fn stuck_state_errors_for_rf_but_holds_in_windows() {
        // Triangle with single-edge sets: at C the AB edge is unusable, so
        // the window is spent holding.
        let tri = TabularModel::triangle();
        let scheme = PartialNeighborScheme::systematic(1, 10);
        let mut s = Sampler::new(&tri, Method::UnbiasedPns, scheme, 2, seeded_rng(3)).unwrap();
        let mut chain = JumpChain::new();
        s.advance(10, &mut chain).unwrap();
        assert_eq!(chain.states(), &[2]);
        assert_eq!(chain.multiplicities(), &[10]);
        assert_eq!(s.stats().stuck_windows, 1);
    }

    #[test]
    fn advancing_in_pieces_is_one_chain() {
        let cube = TabularModel::hypercube16();
        let mut last = LastState::default();
        let scheme = PartialNeighborScheme::systematic(2, 25);
        let mut s = Sampler::new(&cube, Method::RfAlternating, scheme, 3, seeded_rng(4)).unwrap();
        for _ in 0..10 {
            s.advance(17, &mut last).unwrap();
        }
        assert!(last.0.is_some());
    }
}
