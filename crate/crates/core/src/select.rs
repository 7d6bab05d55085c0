//! Transition weights, proportional selection and multiplicity draws: the
//! pieces every rejection-free sampler is built from.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::DiscreteModel;

/// Acceptance-weighted proposal mass `a_z = Q_i(x,z)·min{1, π(z)Q_i(z,x) / π(x)Q_i(x,z)}`
/// for each candidate move, and its sum (the escape probability).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionWeights {
    pub weights: Vec<f64>,
    pub escape_probability: f64,
}

/// Evaluate transition weights for `moves` at `state`, with the proposal
/// restricted to and renormalized over `moves`.
pub fn transition_weights<M: DiscreteModel>(
    model: &M,
    state: &M::State,
    moves: &[usize],
) -> Result<TransitionWeights> {
    if moves.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut weights = Vec::with_capacity(moves.len());
    let escape_probability = fill_transition_weights(model, state, moves, &mut weights);
    Ok(TransitionWeights {
        weights,
        escape_probability,
    })
}

/// Restricted proposal normalizer `Σ_{c ∈ moves} q(x, c)`.
fn restricted_mass<M: DiscreteModel>(model: &M, state: &M::State, moves: &[usize]) -> f64 {
    moves.iter().map(|&c| model.proposal_weight(state, c)).sum()
}

/// Minimum of 1 and `exp(log_ratio)`. A NaN ratio comes from `-inf - -inf`,
/// i.e. a zero-density current state, and is accepted outright.
#[inline]
pub(crate) fn acceptance(log_ratio: f64) -> f64 {
    if log_ratio.is_nan() || log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// Buffer-reusing form of [`transition_weights`]; returns the escape
/// probability clamped to `[0, 1]`.
pub(crate) fn fill_transition_weights<M: DiscreteModel>(
    model: &M,
    state: &M::State,
    moves: &[usize],
    out: &mut Vec<f64>,
) -> f64 {
    out.clear();
    let mut total = 0.0;
    if model.uniform_proposal() {
        let q = 1.0 / moves.len() as f64;
        for &mv in moves {
            let a = q * acceptance(model.log_ratio(state, mv));
            out.push(a);
            total += a;
        }
    } else {
        let mass = restricted_mass(model, state, moves);
        if mass <= 0.0 {
            out.resize(moves.len(), 0.0);
            return 0.0;
        }
        let mut next = state.clone();
        for &mv in moves {
            let q = model.proposal_weight(state, mv);
            if q <= 0.0 {
                out.push(0.0);
                continue;
            }
            let forward = q / mass;
            next.clone_from(state);
            model.apply_move(&mut next, mv);
            let reverse = model.proposal_weight(&next, mv) / restricted_mass(model, &next, moves);
            let log_ratio = model.log_ratio(state, mv) + (reverse / forward).ln();
            let a = forward * acceptance(log_ratio);
            out.push(a);
            total += a;
        }
    }
    total.min(1.0)
}

/// Weights for a subset redrawn at every state: the forward proposal is
/// renormalized over `moves`, the acceptance ratio uses the full proposal.
/// When `moves` holds every valid move this is the full rejection-free step.
pub(crate) fn fill_subset_weights<M: DiscreteModel>(
    model: &M,
    state: &M::State,
    moves: &[usize],
    out: &mut Vec<f64>,
) -> f64 {
    if model.uniform_proposal() {
        return fill_transition_weights(model, state, moves, out);
    }
    out.clear();
    let mass = restricted_mass(model, state, moves);
    if mass <= 0.0 {
        out.resize(moves.len(), 0.0);
        return 0.0;
    }
    let mut next = state.clone();
    let mut total = 0.0;
    for &mv in moves {
        let q = model.proposal_weight(state, mv);
        if q <= 0.0 {
            out.push(0.0);
            continue;
        }
        next.clone_from(state);
        model.apply_move(&mut next, mv);
        let log_ratio = model.log_ratio(state, mv) + (model.proposal_weight(&next, mv) / q).ln();
        let a = q / mass * acceptance(log_ratio);
        out.push(a);
        total += a;
    }
    total.min(1.0)
}

/// Select an index with probability proportional to its weight, via
/// `argmin_j −log(R_j)/A_j` with `R_j ~ Uniform(0, 1]`. One uniform is drawn
/// per positive weight, in index order; zero weights are skipped and never
/// selected. Ties go to the lowest index.
pub fn select_proportional<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let mut best = None;
    let mut best_key = f64::INFINITY;
    for (j, &a) in weights.iter().enumerate() {
        if a <= 0.0 {
            continue;
        }
        let r = 1.0 - rng.random::<f64>();
        let key = -r.ln() / a;
        if best.is_none() || key < best_key {
            best = Some(j);
            best_key = key;
        }
    }
    best.ok_or(Error::NoCandidate)
}

pub const DEFAULT_MULTIPLICITY_CAP: u64 = 1 << 62;

/// Draws `1 + G`, `G ~ Geometric(p)` on `{0, 1, ...}`, by inversion, with a
/// hard cap guarding `p ≈ 0`. Capped draws are counted.
#[derive(Debug, Clone)]
pub struct MultiplicitySampler {
    cap: u64,
    capped: u64,
}

impl Default for MultiplicitySampler {
    fn default() -> Self {
        Self::new(DEFAULT_MULTIPLICITY_CAP)
    }
}

impl MultiplicitySampler {
    pub fn new(cap: u64) -> Self {
        Self {
            cap: cap.max(1),
            capped: 0,
        }
    }

    pub fn capped_draws(&self) -> u64 {
        self.capped
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, p: f64, rng: &mut R) -> Result<u64> {
        if !(p > 0.0) {
            return Err(Error::Domain(format!(
                "escape probability {p} leaves no exit from the current state"
            )));
        }
        if p >= 1.0 {
            return Ok(1);
        }
        let u = 1.0 - rng.random::<f64>();
        let g = (u.ln() / (-p).ln_1p()).floor();
        if g >= (self.cap - 1) as f64 {
            self.capped += 1;
            if self.capped == 1 {
                log::warn!("multiplicity draw capped at {} (p = {p:e})", self.cap);
            }
            return Ok(self.cap);
        }
        Ok(1 + g as u64)
    }
}

/// One multiplicity draw with the default cap.
pub fn sample_multiplicity<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    MultiplicitySampler::default().draw(p, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::seeded_rng;
    use crate::models::TabularModel;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn triangle_weights_at_a() {
        let m = TabularModel::triangle();
        // A = 0; its valid moves are the AB and AC edges.
        let tw = transition_weights(&m, &0, &[0, 1, 2]).unwrap();
        let positive: Vec<f64> = tw.weights.iter().copied().filter(|&w| w > 0.0).collect();
        assert_eq!(positive.len(), 2);
        assert!(positive.iter().all(|&w| approx(w, 0.5)));
        assert!(approx(tw.escape_probability, 1.0));
    }

    #[test]
    fn triangle_weights_at_c() {
        let m = TabularModel::triangle();
        let tw = transition_weights(&m, &2, &[0, 1, 2]).unwrap();
        // moves from C: to A weight 1/2 * 1/3, to B weight 1/2 * 2/3
        let to_a = m.move_between(2, 0).unwrap();
        let to_b = m.move_between(2, 1).unwrap();
        assert!(approx(tw.weights[to_a], 1.0 / 6.0));
        assert!(approx(tw.weights[to_b], 1.0 / 3.0));
        assert!(approx(tw.escape_probability, 0.5));
    }

    #[test]
    fn flat_target_has_unit_escape() {
        let m = TabularModel::from_edges(&[0.0; 4], &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let tw = transition_weights(&m, &1, &(0..m.dimension()).collect::<Vec<_>>()).unwrap();
        let pos: Vec<_> = tw.weights.iter().filter(|&&w| w > 0.0).collect();
        assert!(pos.windows(2).all(|w| approx(*w[0], *w[1])));
        assert!(approx(tw.escape_probability, 1.0));
    }

    #[test]
    fn weights_shift_invariant() {
        let a = TabularModel::triangle();
        let b = TabularModel::from_edges(
            &[1f64.ln() + 7.5, 2f64.ln() + 7.5, 3f64.ln() + 7.5],
            &[(0, 1), (1, 2), (0, 2)],
        )
        .unwrap();
        for s in 0..3 {
            let wa = transition_weights(&a, &s, &[0, 1, 2]).unwrap();
            let wb = transition_weights(&b, &s, &[0, 1, 2]).unwrap();
            for (x, y) in wa.weights.iter().zip(&wb.weights) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hastings_correction_on_asymmetric_restriction() {
        // Triangle restricted to the AB and BC edges: A sees only B, while B
        // sees both A and C, so Q_i(A,B) = 1 and Q_i(B,A) = 1/2.
        let m = TabularModel::triangle();
        let ab = m.move_between(0, 1).unwrap();
        let bc = m.move_between(1, 2).unwrap();
        let tw = transition_weights(&m, &0, &[ab, bc]).unwrap();
        // π(B)Q(B,A) / π(A)Q(A,B) = 2 * 0.5 / 1 = 1
        assert!(approx(tw.weights[0], 1.0));
        let tw = transition_weights(&m, &1, &[ab, bc]).unwrap();
        // B -> A: 0.5 * min(1, 1 * 1 / (2 * 0.5)) = 0.5
        assert!(approx(tw.weights[0], 0.5));
        // B -> C: 0.5 * min(1, 3 * 0.5 / (2 * 0.5)) = 0.5
        assert!(approx(tw.weights[1], 0.5));
    }

    #[test]
    fn empty_candidates_rejected() {
        let m = TabularModel::triangle();
        assert!(matches!(
            transition_weights(&m, &0, &[]),
            Err(Error::EmptyCandidates)
        ));
    }

    #[test]
    fn select_single_and_zeros() {
        let mut rng = seeded_rng(1);
        for _ in 0..100 {
            assert_eq!(select_proportional(&[5.0], &mut rng).unwrap(), 0);
            assert_eq!(select_proportional(&[0.0, 2.0, 0.0], &mut rng).unwrap(), 1);
        }
        assert!(matches!(
            select_proportional(&[0.0, 0.0], &mut rng),
            Err(Error::NoCandidate)
        ));
        assert!(matches!(
            select_proportional(&[], &mut rng),
            Err(Error::NoCandidate)
        ));
    }

    #[test]
    fn select_frequencies() {
        let mut rng = seeded_rng(2);
        let n = 100_000;
        let mut counts = [0u32; 3];
        for _ in 0..n {
            counts[select_proportional(&[1.0, 2.0, 3.0], &mut rng).unwrap()] += 1;
        }
        for (c, want) in counts.iter().zip([1.0 / 6.0, 1.0 / 3.0, 0.5]) {
            assert!((*c as f64 / n as f64 - want).abs() < 0.01);
        }
        let mut counts = [0u32; 2];
        for _ in 0..n {
            counts[select_proportional(&[1.0, 1.0], &mut rng).unwrap()] += 1;
        }
        assert!((counts[0] as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn multiplicity_edges() {
        let mut rng = seeded_rng(3);
        for _ in 0..1000 {
            assert_eq!(sample_multiplicity(1.0, &mut rng).unwrap(), 1);
            assert!(sample_multiplicity(0.3, &mut rng).unwrap() >= 1);
        }
        assert!(matches!(
            sample_multiplicity(0.0, &mut rng),
            Err(Error::Domain(_))
        ));
        assert!(sample_multiplicity(-0.5, &mut rng).is_err());
        assert!(sample_multiplicity(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn multiplicity_cap_counts() {
        let mut rng = seeded_rng(4);
        let mut sampler = MultiplicitySampler::new(10);
        let draws: Vec<u64> = (0..100)
            .map(|_| sampler.draw(1e-9, &mut rng).unwrap())
            .collect();
        assert!(draws.iter().all(|&d| d == 10));
        assert_eq!(sampler.capped_draws(), 100);
    }

    #[test]
    fn multiplicity_means() {
        let mut rng = seeded_rng(5);
        for (p, want) in [(0.5, 2.0), (4.0 / 9.0, 2.25)] {
            let n = 1_000_000;
            let sum: u64 = (0..n)
                .map(|_| sample_multiplicity(p, &mut rng).unwrap())
                .sum();
            let mean = sum as f64 / n as f64;
            assert!((mean - want).abs() < 0.01, "p={p} mean={mean}");
        }
    }
}
