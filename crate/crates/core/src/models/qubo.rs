use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::model::{seeded_rng, DiscreteModel, Enumerable};

/// Packed bit vector; bit `i` is `x_{i+1}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitState {
    words: SmallVec<[u64; 2]>,
    len: usize,
}

impl BitState {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: SmallVec::from_elem(0, len.div_ceil(64).max(1)),
            len,
        }
    }

    /// Bits of `index`, least significant first. Requires `len <= 64`.
    pub fn from_index(index: usize, len: usize) -> Self {
        let mut s = Self::zeros(len);
        s.words[0] = index as u64;
        s
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.flip(i);
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    /// Packed index of the first 64 bits.
    pub fn index(&self) -> usize {
        self.words[0] as usize
    }

    /// Positions of set bits in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            })
        })
    }
}

impl fmt::Debug for BitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitState({self})")
    }
}

impl fmt::Display for BitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `π(x) ∝ exp(xᵀQx)` over `{0,1}^N` with uniform single-flip proposals.
#[derive(Debug, Clone)]
pub struct QuboModel {
    n: usize,
    /// Row-major upper triangle of Q, zeros below the diagonal.
    upper: Vec<f64>,
    /// Symmetric couplings `C_ij = Q_ij + Q_ji` off the diagonal, `Q_ii` on it.
    coupling: Vec<f64>,
}

impl QuboModel {
    /// From a dense row-major `n × n` upper-triangular matrix.
    pub fn from_upper(n: usize, upper: Vec<f64>) -> Result<Self> {
        if n == 0 || upper.len() != n * n {
            return Err(Error::Structural(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                upper.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = upper[i * n + j];
                if !v.is_finite() {
                    return Err(Error::Structural(format!("Q[{i}][{j}] is not finite")));
                }
                if j < i && v != 0.0 {
                    return Err(Error::Structural(format!(
                        "Q[{i}][{j}] below the diagonal must be zero"
                    )));
                }
            }
        }
        let mut coupling = vec![0.0; n * n];
        for i in 0..n {
            coupling[i * n + i] = upper[i * n + i];
            for j in i + 1..n {
                coupling[i * n + j] = upper[i * n + j];
                coupling[j * n + i] = upper[i * n + j];
            }
        }
        Ok(Self { n, upper, coupling })
    }

    /// Upper-triangular entries in row-major order, `n(n+1)/2` of them.
    pub fn from_triangle(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * (n + 1) / 2 {
            return Err(Error::Structural(format!(
                "expected {} triangular entries, got {}",
                n * (n + 1) / 2,
                entries.len()
            )));
        }
        let mut upper = vec![0.0; n * n];
        let mut it = entries.iter();
        for i in 0..n {
            for j in i..n {
                upper[i * n + j] = *it.next().expect("length checked");
            }
        }
        Self::from_upper(n, upper)
    }

    pub fn n_bits(&self) -> usize {
        self.n
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.upper[i * self.n + j]
    }

    pub fn triangle_entries(&self) -> Vec<f64> {
        (0..self.n)
            .flat_map(|i| (i..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.q(i, j))
            .collect()
    }

    /// `xᵀQx` from scratch, `O(N²)`.
    pub fn energy(&self, state: &BitState) -> f64 {
        let ones: Vec<usize> = state.ones().collect();
        let mut e = 0.0;
        for (a, &i) in ones.iter().enumerate() {
            for &j in &ones[a..] {
                e += self.upper[i * self.n + j];
            }
        }
        e
    }

    /// Change in `xᵀQx` when bit `i` flips, `O(N)`.
    #[inline]
    pub(crate) fn flip_delta(&self, state: &BitState, i: usize) -> f64 {
        let row = &self.coupling[i * self.n..(i + 1) * self.n];
        let mut field = row[i];
        for j in state.ones() {
            if j != i {
                field += row[j];
            }
        }
        if state.get(i) {
            -field
        } else {
            field
        }
    }

    /// Plain-text format: `N` on the first line, then the `N(N+1)/2`
    /// upper-triangular entries row-major, whitespace separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let n: usize = tokens
            .next()
            .ok_or_else(|| Error::Parse("empty QUBO file".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad dimension: {e}")))?;
        let entries = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad entry {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_triangle(n, &entries).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for i in 0..self.n {
            let row: Vec<String> = (i..self.n).map(|j| format!("{:?}", self.q(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// `Δ` in `xᵀQx` from flipping bit `i` (zero-based).
pub fn qubo_flip_delta(model: &QuboModel, state: &BitState, i: usize) -> Result<f64> {
    if i >= model.n || state.len() != model.n {
        return Err(Error::Structural(format!(
            "bit {i} out of range for {} bits",
            model.n
        )));
    }
    Ok(model.flip_delta(state, i))
}

/// Upper-triangular entries iid `Normal(0, std_dev²)`, drawn row-major.
pub fn make_qubo_random(n_bits: usize, std_dev: f64, seed: u64) -> Result<QuboModel> {
    if n_bits == 0 || !(std_dev > 0.0) {
        return Err(Error::Config(format!(
            "need n_bits >= 1 and std_dev > 0 (got {n_bits}, {std_dev})"
        )));
    }
    let normal = Normal::new(0.0, std_dev).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = seeded_rng(seed);
    let entries: Vec<f64> = (0..n_bits * (n_bits + 1) / 2)
        .map(|_| normal.sample(&mut rng))
        .collect();
    QuboModel::from_triangle(n_bits, &entries)
}

impl DiscreteModel for QuboModel {
    type State = BitState;

    fn dimension(&self) -> usize {
        self.n
    }

    fn neighbor_count(&self) -> usize {
        self.n
    }

    fn log_weight(&self, state: &BitState) -> f64 {
        self.energy(state)
    }

    #[inline]
    fn log_ratio(&self, state: &BitState, mv: usize) -> f64 {
        self.flip_delta(state, mv)
    }

    #[inline]
    fn apply_move(&self, state: &mut BitState, mv: usize) {
        state.flip(mv);
    }

    fn uniform_proposal(&self) -> bool {
        true
    }

    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> BitState {
        let mut s = BitState::zeros(self.n);
        for (w, word) in s.words.iter_mut().enumerate() {
            let bits = (self.n - w * 64).min(64);
            *word = if bits == 64 {
                rng.random()
            } else {
                rng.random::<u64>() & ((1u64 << bits) - 1)
            };
        }
        s
    }
}

impl Enumerable for QuboModel {
    fn num_states(&self) -> u128 {
        if self.n >= 128 {
            u128::MAX
        } else {
            1u128 << self.n
        }
    }

    fn state_index(&self, state: &BitState) -> usize {
        state.index()
    }

    fn state_at(&self, index: usize) -> BitState {
        BitState::from_index(index, self.n)
    }

    fn state_label(&self, state: &BitState) -> String {
        state.to_string()
    }
}
