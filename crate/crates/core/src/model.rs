//! Target-model traits and partial neighbor schemes.
//!
//! Discrete models expose their neighborhood as a fixed set of *moves*
//! indexed `0..dimension()`. A move applied twice returns to the starting
//! state, so any subset of move indices is a symmetric partial neighbor set:
//! if `y` is reached from `x` through a move in the subset, `x` is reached
//! from `y` through the same move. Models whose moves are not valid in every
//! state (e.g. the 3-state triangle, labelled by edge colour) report that
//! through [`DiscreteModel::is_valid_move`].

use std::fmt::Debug;

use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// The random stream every sampler draws from.
pub type ChainRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ChainRng {
    ChainRng::seed_from_u64(seed)
}

/// An unnormalized target over a discrete state space with a finite,
/// move-indexed neighborhood.
pub trait DiscreteModel: Sync {
    type State: Clone + PartialEq + Debug + Send;

    /// Number of move coordinates (e.g. bits for a QUBO).
    fn dimension(&self) -> usize;

    /// `|N(x)|`, constant for every model shipped here.
    fn neighbor_count(&self) -> usize;

    /// `log π̃(x)`.
    fn log_weight(&self, state: &Self::State) -> f64;

    fn is_valid_move(&self, _state: &Self::State, _mv: usize) -> bool {
        true
    }

    /// Full proposal `q(x, move(x))`; zero for invalid moves.
    fn proposal_weight(&self, state: &Self::State, mv: usize) -> f64 {
        if self.is_valid_move(state, mv) {
            1.0 / self.neighbor_count() as f64
        } else {
            0.0
        }
    }

    /// `log π̃(move(x)) − log π̃(x)`.
    fn log_ratio(&self, state: &Self::State, mv: usize) -> f64;

    fn apply_move(&self, state: &mut Self::State, mv: usize);

    /// True when every move is valid in every state and `q` is uniform, so
    /// restricted proposals are symmetric and the Hastings factor is 1.
    fn uniform_proposal(&self) -> bool {
        false
    }

    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
}

/// Models small enough to enumerate, with a dense state index.
pub trait Enumerable: DiscreteModel {
    fn num_states(&self) -> u128;

    fn state_index(&self, state: &Self::State) -> usize;

    fn state_at(&self, index: usize) -> Self::State;

    fn state_label(&self, state: &Self::State) -> String;
}

/// An unnormalized density on `R^d`. `log_density` returns `-inf` off the
/// support.
pub trait ContinuousModel: Sync {
    fn dimension(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// The whole neighborhood, one set.
    Full,
    /// Consecutive cyclic blocks of `set_size` moves, advancing by
    /// `set_size` each window.
    Systematic { set_size: usize },
    /// A fresh uniformly random `set_size`-subset of moves each window.
    Random { set_size: usize },
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Full => "full",
            SchemeKind::Systematic { .. } => "systematic",
            SchemeKind::Random { .. } => "random",
        }
    }

    pub fn set_size(&self, dimension: usize) -> usize {
        match *self {
            SchemeKind::Full => dimension,
            SchemeKind::Systematic { set_size } | SchemeKind::Random { set_size } => set_size,
        }
    }
}

/// Rule producing the active move subset, switched every `window` original
/// samples (L₀).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialNeighborScheme {
    pub kind: SchemeKind,
    pub window: u64,
}

impl PartialNeighborScheme {
    pub fn full(window: u64) -> Self {
        Self {
            kind: SchemeKind::Full,
            window,
        }
    }

    pub fn systematic(set_size: usize, window: u64) -> Self {
        Self {
            kind: SchemeKind::Systematic { set_size },
            window,
        }
    }

    pub fn random(set_size: usize, window: u64) -> Self {
        Self {
            kind: SchemeKind::Random { set_size },
            window,
        }
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidScheme("window L0 must be positive".into()));
        }
        match self.kind {
            SchemeKind::Full => Ok(()),
            SchemeKind::Systematic { set_size } | SchemeKind::Random { set_size } => {
                check_set_size(dimension, set_size)
            }
        }
    }

    /// Number of distinct systematic sets in one cycle (ℐ). `None` for the
    /// random scheme, which has no cycle.
    pub fn num_sets(&self, dimension: usize) -> Option<usize> {
        match self.kind {
            SchemeKind::Full => Some(1),
            SchemeKind::Systematic { set_size } => Some(dimension / gcd(dimension, set_size)),
            SchemeKind::Random { .. } => None,
        }
    }

    /// The move set for window `i`; random schemes draw from `rng`.
    pub fn index_set<R: Rng + ?Sized>(
        &self,
        dimension: usize,
        i: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        match self.kind {
            SchemeKind::Full => Ok((0..dimension).collect()),
            SchemeKind::Systematic { set_size } => systematic_index_set(dimension, set_size, i),
            SchemeKind::Random { set_size } => random_index_set(dimension, set_size, rng),
        }
    }
}

fn check_set_size(dimension: usize, set_size: usize) -> Result<()> {
    if set_size == 0 || set_size > dimension {
        return Err(Error::InvalidScheme(format!(
            "set size {set_size} outside 1..={dimension}"
        )));
    }
    Ok(())
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Window `i` of the systematic scheme: `set_size` consecutive move indices
/// starting at `(i * set_size) mod dimension`, wrapping around. Indices are
/// zero-based.
pub fn systematic_index_set(dimension: usize, set_size: usize, i: usize) -> Result<Vec<usize>> {
    check_set_size(dimension, set_size)?;
    let start = ((i % dimension) * (set_size % dimension)) % dimension;
    Ok((0..set_size).map(|k| (start + k) % dimension).collect())
}

/// A uniformly random `set_size`-subset of `0..dimension`, sorted.
pub fn random_index_set<R: Rng + ?Sized>(
    dimension: usize,
    set_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_set_size(dimension, set_size)?;
    let mut set = index::sample(rng, dimension, set_size).into_vec();
    set.sort_unstable();
    Ok(set)
}

/// `num_pairs` iid standard-normal offsets, each followed by its negation.
pub fn symmetric_pair_offsets<R: Rng + ?Sized>(
    dim: usize,
    num_pairs: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let mut flat = Vec::new();
    fill_symmetric_offsets(dim, num_pairs, rng, &mut flat)?;
    Ok(flat.chunks(dim).map(<[f64]>::to_vec).collect())
}

/// Flat variant of [`symmetric_pair_offsets`]: `2 * num_pairs` rows of `dim`
/// values written into `out`.
pub(crate) fn fill_symmetric_offsets<R: Rng + ?Sized>(
    dim: usize,
    num_pairs: usize,
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Result<()> {
    if dim == 0 || num_pairs == 0 {
        return Err(Error::InvalidScheme(format!(
            "offsets need dim >= 1 and num_pairs >= 1 (got {dim}, {num_pairs})"
        )));
    }
    out.clear();
    out.reserve(2 * num_pairs * dim);
    for _ in 0..num_pairs {
        let start = out.len();
        for _ in 0..dim {
            out.push(rng.sample::<f64, _>(StandardNormal));
        }
        for k in 0..dim {
            out.push(-out[start + k]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    #[test]
    fn systematic_half_split() {
        assert_eq!(
            systematic_index_set(16, 8, 0).unwrap(),
            (0..8).collect::<Vec<_>>()
        );
        assert_eq!(
            systematic_index_set(16, 8, 1).unwrap(),
            (8..16).collect::<Vec<_>>()
        );
    }

    #[test]
    fn systematic_wraps_around() {
        // bits 15, 16, 1..12 in one-based numbering
        let mut expected = vec![14, 15];
        expected.extend(0..12);
        assert_eq!(systematic_index_set(16, 14, 1).unwrap(), expected);
        let mut third = vec![12, 13, 14, 15];
        third.extend(0..10);
        assert_eq!(systematic_index_set(16, 14, 2).unwrap(), third);
    }

    #[test]
    fn systematic_full_set() {
        assert_eq!(systematic_index_set(4, 4, 0).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(systematic_index_set(4, 4, 7).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn set_size_errors() {
        assert!(matches!(
            systematic_index_set(4, 5, 0),
            Err(Error::InvalidScheme(_))
        ));
        assert!(matches!(
            systematic_index_set(4, 0, 0),
            Err(Error::InvalidScheme(_))
        ));
        let mut rng = seeded_rng(1);
        assert!(random_index_set(4, 5, &mut rng).is_err());
        assert!(PartialNeighborScheme::systematic(2, 0).validate(4).is_err());
    }

    #[test]
    fn cycle_length_for_size_fourteen() {
        let scheme = PartialNeighborScheme::systematic(14, 100);
        assert_eq!(scheme.num_sets(16), Some(8));
        let cycle: Vec<_> = (0..8)
            .map(|i| systematic_index_set(16, 14, i).unwrap())
            .collect();
        assert_eq!(systematic_index_set(16, 14, 8).unwrap(), cycle[0]);
        let union: BTreeSet<usize> = cycle.iter().flatten().copied().collect();
        assert_eq!(union.len(), 16);
    }

    #[test]
    fn divisible_sets_partition() {
        for (n, size) in [(16, 8), (16, 4), (12, 3), (6, 1)] {
            let sets = n / size;
            let mut seen = vec![0; n];
            for i in 0..sets {
                for j in systematic_index_set(n, size, i).unwrap() {
                    seen[j] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1), "n={n} size={size}");
        }
    }

    #[test]
    fn random_subset_trivial_and_reproducible() {
        let mut rng = seeded_rng(3);
        assert_eq!(random_index_set(2, 2, &mut rng).unwrap(), vec![0, 1]);
        let a = random_index_set(16, 8, &mut seeded_rng(99)).unwrap();
        let b = random_index_set(16, 8, &mut seeded_rng(99)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 8);
    }

    #[test]
    fn random_subset_inclusion_frequency() {
        // each index is in a 2-subset of 4 with probability exactly 1/2
        let mut rng = seeded_rng(11);
        let draws = 100_000;
        let mut hits = [0u32; 4];
        for _ in 0..draws {
            for i in random_index_set(4, 2, &mut rng).unwrap() {
                hits[i] += 1;
            }
        }
        for h in hits {
            let f = h as f64 / draws as f64;
            assert!((f - 0.5).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn offsets_pair_up() {
        let mut rng = seeded_rng(5);
        let offsets = symmetric_pair_offsets(2, 25, &mut rng).unwrap();
        assert_eq!(offsets.len(), 50);
        for k in 0..2 {
            let sum: f64 = offsets.iter().map(|o| o[k]).sum();
            assert_eq!(sum, 0.0);
        }
        for pair in offsets.chunks(2) {
            assert_eq!(pair[0][0], -pair[1][0]);
            assert_eq!(pair[0][1], -pair[1][1]);
        }
        assert!(symmetric_pair_offsets(0, 1, &mut rng).is_err());
        assert!(symmetric_pair_offsets(2, 0, &mut rng).is_err());
    }

    #[test]
    fn offsets_unit_variance() {
        let mut rng = seeded_rng(8);
        let mut buf = Vec::new();
        let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0.0);
        for _ in 0..100_000 {
            fill_symmetric_offsets(2, 1, &mut rng, &mut buf).unwrap();
            // first row of each pair is an independent draw
            for &v in &buf[..2] {
                sum += v;
                sum_sq += v * v;
                count += 1.0;
            }
        }
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn gcd_basics() {
        assert_eq!(gcd(16, 14), 2);
        assert_eq!(gcd(16, 8), 8);
        assert_eq!(gcd(7, 3), 1);
    }
}
