use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{DiscreteModel, Enumerable};

/// An explicit finite state space with labelled adjacency.
///
/// Every edge carries a move label, and a label appears at most once per
/// state, so "apply move `c`" is well defined and self-inverse. Labels play
/// the role of bit indices in the QUBO model: partial neighbor sets are
/// subsets of labels.
#[derive(Debug, Clone)]
pub struct TabularModel {
    labels: Vec<String>,
    log_weights: Vec<f64>,
    /// `table[state][label] = Some((target, q))`
    table: Vec<Vec<Option<(usize, f64)>>>,
    degree: usize,
    uniform: bool,
}

impl TabularModel {
    /// Build from per-state adjacency lists of `(label, target, proposal)`.
    pub fn new(
        labels: Vec<String>,
        log_weights: Vec<f64>,
        adjacency: Vec<Vec<(usize, usize, f64)>>,
    ) -> Result<Self> {
        let n = log_weights.len();
        if n == 0 || labels.len() != n || adjacency.len() != n {
            return Err(Error::Structural(
                "labels, weights and adjacency must have one entry per state".into(),
            ));
        }
        if let Some(bad) = log_weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Structural(format!(
                "log-weight of state {bad} is not finite"
            )));
        }
        let dimension = adjacency
            .iter()
            .flatten()
            .map(|&(c, _, _)| c + 1)
            .max()
            .unwrap_or(0);
        let mut table = vec![vec![None; dimension]; n];
        for (x, row) in adjacency.iter().enumerate() {
            let mut total = 0.0;
            for &(c, y, q) in row {
                if y >= n || y == x {
                    return Err(Error::Structural(format!("bad edge {x} -> {y}")));
                }
                if !(q > 0.0) {
                    return Err(Error::Structural(format!(
                        "proposal {x} -> {y} must be positive"
                    )));
                }
                if table[x][c].replace((y, q)).is_some() {
                    return Err(Error::Structural(format!(
                        "label {c} used twice at state {x}"
                    )));
                }
                total += q;
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Structural(format!(
                    "proposal row {x} sums to {total}"
                )));
            }
        }
        let degree = adjacency[0].len();
        if adjacency.iter().any(|row| row.len() != degree) || degree == 0 {
            return Err(Error::Structural(
                "every state needs the same positive degree".into(),
            ));
        }
        for x in 0..n {
            for c in 0..dimension {
                if let Some((y, _)) = table[x][c] {
                    if table[y][c].map(|(back, _)| back) != Some(x) {
                        return Err(Error::Structural(format!(
                            "label {c} is not symmetric between {x} and {y}"
                        )));
                    }
                }
            }
        }
        let uniform = degree == dimension
            && table
                .iter()
                .flatten()
                .all(|e| matches!(e, Some((_, q)) if (*q - 1.0 / degree as f64).abs() < 1e-15));
        Ok(Self {
            labels,
            log_weights,
            table,
            degree,
            uniform,
        })
    }

    /// Uniform-proposal model over an undirected edge list, labelling edges
    /// by a greedy proper edge colouring.
    pub fn from_edges(log_weights: &[f64], edges: &[(usize, usize)]) -> Result<Self> {
        let n = log_weights.len();
        let mut used: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Structural(format!("bad edge ({a}, {b})")));
            }
            let colour = (0..)
                .find(|c| !used[a].contains(c) && !used[b].contains(c))
                .expect("unbounded colour search");
            used[a].push(colour);
            used[b].push(colour);
            adjacency[a].push((colour, b));
            adjacency[b].push((colour, a));
        }
        let adjacency = adjacency
            .into_iter()
            .map(|row| {
                let q = 1.0 / row.len().max(1) as f64;
                row.into_iter().map(|(c, y)| (c, y, q)).collect()
            })
            .collect();
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::new(labels, log_weights.to_vec(), adjacency)
    }

    /// Three mutually adjacent states with `π ∝ (1, 2, 3)`. Moves are the
    /// edges AB, BC, AC in that order.
    pub fn triangle() -> Self {
        let mut m = Self::from_edges(
            &[1f64.ln(), 2f64.ln(), 3f64.ln()],
            &[(0, 1), (1, 2), (0, 2)],
        )
        .expect("triangle is well formed");
        m.labels = vec!["A".into(), "B".into(), "C".into()];
        m
    }

    /// The 4-bit hypercube with `π(x) ∝ e^{popcount(x)}`: 16 states, each
    /// with four neighbors. Move `i` flips bit `i`.
    pub fn hypercube16() -> Self {
        let labels = (0..16).map(|x: usize| format!("{x:04b}")).collect();
        let log_weights = (0..16u32).map(|x| x.count_ones() as f64).collect();
        let adjacency = (0..16usize)
            .map(|x| (0..4).map(|b| (b, x ^ (1 << b), 0.25)).collect())
            .collect();
        Self::new(labels, log_weights, adjacency).expect("hypercube is well formed")
    }

    pub fn num_states_usize(&self) -> usize {
        self.log_weights.len()
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    /// Neighbor reached from `state` by move `mv`.
    pub fn neighbor(&self, state: usize, mv: usize) -> Option<usize> {
        self.table[state].get(mv).copied().flatten().map(|(y, _)| y)
    }

    /// The move label joining `from` and `to`, if they are adjacent.
    pub fn move_between(&self, from: usize, to: usize) -> Option<usize> {
        self.table[from]
            .iter()
            .position(|e| matches!(e, Some((y, _)) if *y == to))
    }
}

impl DiscreteModel for TabularModel {
    type State = usize;

    fn dimension(&self) -> usize {
        self.table[0].len()
    }

    fn neighbor_count(&self) -> usize {
        self.degree
    }

    fn log_weight(&self, state: &usize) -> f64 {
        self.log_weights[*state]
    }

    fn is_valid_move(&self, state: &usize, mv: usize) -> bool {
        self.table[*state][mv].is_some()
    }

    fn proposal_weight(&self, state: &usize, mv: usize) -> f64 {
        self.table[*state][mv].map_or(0.0, |(_, q)| q)
    }

    fn log_ratio(&self, state: &usize, mv: usize) -> f64 {
        match self.table[*state][mv] {
            Some((y, _)) => self.log_weights[y] - self.log_weights[*state],
            None => f64::NEG_INFINITY,
        }
    }

    fn apply_move(&self, state: &mut usize, mv: usize) {
        if let Some((y, _)) = self.table[*state][mv] {
            *state = y;
        }
    }

    fn uniform_proposal(&self) -> bool {
        self.uniform
    }

    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.log_weights.len())
    }
}

impl Enumerable for TabularModel {
    fn num_states(&self) -> u128 {
        self.log_weights.len() as u128
    }

    fn state_index(&self, state: &usize) -> usize {
        *state
    }

    fn state_at(&self, index: usize) -> usize {
        index
    }

    fn state_label(&self, state: &usize) -> String {
        self.labels[*state].clone()
    }
}
