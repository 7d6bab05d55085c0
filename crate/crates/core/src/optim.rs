//! Simulated Annealing, Optimization Rejection-Free and Optimization PNS,
//! and the optimize-then-sample burn-in built on them.

use rand::Rng;

use crate::chain::ChainSink;
use crate::error::{Error, Result};
use crate::model::{seeded_rng, DiscreteModel, PartialNeighborScheme, SchemeKind};
use crate::samplers::{draw_valid_subset, run_from, BurnIn, RunStats, SamplerConfig};
use crate::select::{acceptance, fill_transition_weights, select_proportional};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoolingSchedule {
    Constant(f64),
    /// `T(k) = start · ratio^k` with `0 < ratio ≤ 1`.
    Geometric {
        start: f64,
        ratio: f64,
    },
}

impl CoolingSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CoolingSchedule::Constant(t) => t > 0.0 && t.is_finite(),
            CoolingSchedule::Geometric { start, ratio } => {
                start > 0.0 && start.is_finite() && ratio > 0.0 && ratio <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid cooling schedule {self:?}")))
        }
    }

    pub fn temperature(&self, k: u64) -> f64 {
        match *self {
            CoolingSchedule::Constant(t) => t,
            CoolingSchedule::Geometric { start, ratio } => {
                (start * ratio.powf(k as f64)).max(f64::MIN_POSITIVE)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<S> {
    pub best_state: S,
    pub best_log_weight: f64,
    pub final_state: S,
    /// Steps taken (proposals for annealing, jumps for the others).
    pub trajectory_length: u64,
}

struct Tracker<S> {
    best_state: S,
    best_log_weight: f64,
    log_weight: f64,
}

impl<S: Clone> Tracker<S> {
    fn new(state: &S, log_weight: f64) -> Self {
        Self {
            best_state: state.clone(),
            best_log_weight: log_weight,
            log_weight,
        }
    }

    fn moved(&mut self, state: &S, delta: f64) {
        self.log_weight += delta;
        if self.log_weight > self.best_log_weight {
            self.best_log_weight = self.log_weight;
            self.best_state.clone_from(state);
        }
    }

    fn finish(self, final_state: S, steps: u64) -> OptimizationResult<S> {
        OptimizationResult {
            best_state: self.best_state,
            best_log_weight: self.best_log_weight,
            final_state,
            trajectory_length: steps,
        }
    }
}

/// Draws a move from the full proposal `q(x, ·)`, consuming one uniform.
fn propose_full<M: DiscreteModel, R: Rng + ?Sized>(
    model: &M,
    state: &M::State,
    rng: &mut R,
) -> Option<usize> {
    let dim = model.dimension();
    if model.uniform_proposal() {
        return Some(rng.random_range(0..dim));
    }
    let target = rng.random::<f64>();
    let mut acc = 0.0;
    let mut chosen = None;
    for c in 0..dim {
        let q = model.proposal_weight(state, c);
        if q <= 0.0 {
            continue;
        }
        acc += q;
        chosen = Some(c);
        if target < acc {
            break;
        }
    }
    chosen
}

/// Tempered Metropolis with running-max tracking, from a uniformly random
/// start. At `T = 1` it replays the Metropolis-Hastings chain of the same
/// seed.
pub fn run_sa<M: DiscreteModel>(
    model: &M,
    schedule: CoolingSchedule,
    steps: u64,
    seed: u64,
) -> Result<OptimizationResult<M::State>> {
    schedule.validate()?;
    if steps == 0 {
        return Err(Error::Config("annealing needs at least one step".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut state = model.random_state(&mut rng);
    let mut tracker = Tracker::new(&state, model.log_weight(&state));
    let mut next = state.clone();
    for k in 1..=steps {
        let proposal = propose_full(model, &state, &mut rng);
        let u = rng.random::<f64>();
        let Some(mv) = proposal else { continue };
        let delta = model.log_ratio(&state, mv);
        let mut log_ratio = delta / schedule.temperature(k);
        if !model.uniform_proposal() {
            next.clone_from(&state);
            model.apply_move(&mut next, mv);
            log_ratio +=
                (model.proposal_weight(&next, mv) / model.proposal_weight(&state, mv)).ln();
        }
        if u < acceptance(log_ratio) {
            model.apply_move(&mut state, mv);
            tracker.moved(&state, delta);
        }
    }
    Ok(tracker.finish(state, steps))
}

/// Rejection-free jumps over the full neighborhood; never stays put.
pub fn run_opt_rf<M: DiscreteModel>(
    model: &M,
    steps: u64,
    seed: u64,
) -> Result<OptimizationResult<M::State>> {
    let mut rng = seeded_rng(seed);
    let start = model.random_state(&mut rng);
    let moves: Vec<usize> = (0..model.dimension()).collect();
    let mut weights = Vec::with_capacity(moves.len());
    let mut state = start;
    let mut tracker = Tracker::new(&state, model.log_weight(&state));
    for _ in 0..steps {
        fill_transition_weights(model, &state, &moves, &mut weights);
        let j = select_proportional(&weights, &mut rng)?;
        let delta = model.log_ratio(&state, moves[j]);
        model.apply_move(&mut state, moves[j]);
        tracker.moved(&state, delta);
    }
    Ok(tracker.finish(state, steps))
}

/// Rejection-free jumps over a fresh random `set_size`-subset of the valid
/// moves at each step.
pub fn run_opt_pns<M: DiscreteModel>(
    model: &M,
    set_size: usize,
    steps: u64,
    seed: u64,
) -> Result<OptimizationResult<M::State>> {
    let mut rng = seeded_rng(seed);
    let start = model.random_state(&mut rng);
    opt_pns_from(model, set_size, steps, start, &mut rng)
}

pub(crate) fn opt_pns_from<M: DiscreteModel, R: Rng + ?Sized>(
    model: &M,
    set_size: usize,
    steps: u64,
    start: M::State,
    rng: &mut R,
) -> Result<OptimizationResult<M::State>> {
    if set_size == 0 || set_size > model.neighbor_count() {
        return Err(Error::InvalidScheme(format!(
            "optimization set size {set_size} outside 1..={}",
            model.neighbor_count()
        )));
    }
    let mut moves = Vec::with_capacity(model.dimension());
    let mut weights = Vec::with_capacity(model.dimension());
    let mut state = start;
    let mut tracker = Tracker::new(&state, model.log_weight(&state));
    for _ in 0..steps {
        draw_valid_subset(model, &state, set_size, rng, &mut moves);
        fill_transition_weights(model, &state, &moves, &mut weights);
        let j = select_proportional(&weights, rng)?;
        let delta = model.log_ratio(&state, moves[j]);
        model.apply_move(&mut state, moves[j]);
        tracker.moved(&state, delta);
    }
    Ok(tracker.finish(state, steps))
}

/// Subset size the optimizer uses for a sampler's scheme: the scheme's own
/// size when partial, half the neighborhood otherwise.
pub fn default_opt_set_size<M: DiscreteModel>(model: &M, scheme: &PartialNeighborScheme) -> usize {
    let n = model.neighbor_count();
    match scheme.kind {
        SchemeKind::Full => n.div_ceil(2),
        SchemeKind::Systematic { set_size } | SchemeKind::Random { set_size } => set_size.min(n),
    }
}

/// Which optimizer state seeds the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmStart {
    #[default]
    Final,
    Best,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridResult<S> {
    pub start: S,
    pub optimization: OptimizationResult<S>,
    pub stats: RunStats,
}

/// Optimization PNS for `opt_steps` from a uniformly random start, then the
/// configured sampler (with its own burn-in disabled) from the chosen
/// optimizer state. The whole run draws from one stream seeded by
/// `config.seed`.
pub fn hybrid_burn_in<M: DiscreteModel, S: ChainSink<M::State>>(
    model: &M,
    opt_steps: u64,
    opt_set_size: usize,
    warm_start: WarmStart,
    config: &SamplerConfig,
    sink: &mut S,
) -> Result<HybridResult<M::State>> {
    config.validate(model)?;
    let mut rng = seeded_rng(config.seed);
    let start = model.random_state(&mut rng);
    let optimization = opt_pns_from(model, opt_set_size, opt_steps, start, &mut rng)?;
    let start = match warm_start {
        WarmStart::Final => optimization.final_state.clone(),
        WarmStart::Best => optimization.best_state.clone(),
    };
    let config = config.clone().with_burn_in(BurnIn::None);
    let stats = run_from(model, &config, start.clone(), rng, sink)?;
    Ok(HybridResult {
        start,
        optimization,
        stats,
    })
}
