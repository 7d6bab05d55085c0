//! Jump chains and the sinks samplers write into.

/// Receives `(state, multiplicity)` entries as a sampler produces them.
pub trait ChainSink<S: ?Sized> {
    fn record(&mut self, state: &S, multiplicity: u64);
}

impl<S: ?Sized, F: FnMut(&S, u64)> ChainSink<S> for F {
    fn record(&mut self, state: &S, multiplicity: u64) {
        self(state, multiplicity)
    }
}

/// Discards everything (burn-in).
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl<S: ?Sized> ChainSink<S> for NullSink {
    fn record(&mut self, _state: &S, _multiplicity: u64) {}
}

/// Keeps only the most recent state.
#[derive(Debug, Clone)]
pub struct LastState<S>(pub Option<S>);

impl<S> Default for LastState<S> {
    fn default() -> Self {
        Self(None)
    }
}

impl<S: Clone> ChainSink<S> for LastState<S> {
    fn record(&mut self, state: &S, _multiplicity: u64) {
        match &mut self.0 {
            Some(s) => s.clone_from(state),
            None => self.0 = Some(state.clone()),
        }
    }
}

/// States `J_k` with multiplicities `M_k ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChain<S> {
    states: Vec<S>,
    multiplicities: Vec<u64>,
    original_size: u64,
}

impl<S> Default for JumpChain<S> {
    fn default() -> Self {
        Self {
            states: Vec::new(),
            multiplicities: Vec::new(),
            original_size: 0,
        }
    }
}

impl<S> JumpChain<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry; zero multiplicities are dropped.
    pub fn push(&mut self, state: S, multiplicity: u64) {
        if multiplicity == 0 {
            return;
        }
        self.states.push(state);
        self.multiplicities.push(multiplicity);
        self.original_size += multiplicity;
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    /// `Σ M_k`.
    pub fn original_size(&self) -> u64 {
        self.original_size
    }

    /// Number of entries `K`.
    pub fn jump_size(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, u64)> {
        self.states.iter().zip(self.multiplicities.iter().copied())
    }

    pub fn last(&self) -> Option<&S> {
        self.states.last()
    }

    /// Expands to the original chain. Only sensible for short chains.
    pub fn expand(&self) -> Vec<S>
    where
        S: Clone,
    {
        self.iter()
            .flat_map(|(s, m)| std::iter::repeat_n(s.clone(), m as usize))
            .collect()
    }

    /// Merges equal consecutive entries.
    pub fn compressed(&self) -> Self
    where
        S: Clone + PartialEq,
    {
        let mut out = Self::new();
        for (s, m) in self.iter() {
            match out.states.last() {
                Some(prev) if prev == s => {
                    *out.multiplicities.last_mut().expect("nonempty") += m;
                    out.original_size += m;
                }
                _ => out.push(s.clone(), m),
            }
        }
        out
    }
}

impl<S: Clone> ChainSink<S> for JumpChain<S> {
    fn record(&mut self, state: &S, multiplicity: u64) {
        self.push(state.clone(), multiplicity);
    }
}
