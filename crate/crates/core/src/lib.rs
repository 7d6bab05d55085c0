//! Rejection-Free and Partial Neighbor Search MCMC samplers.
//!
//! Discrete targets implement [`DiscreteModel`], whose neighborhood is a
//! fixed set of self-inverse moves; partial neighbor sets are subsets of
//! move indices chosen by a [`PartialNeighborScheme`]. Samplers emit
//! `(state, multiplicity)` entries into a [`ChainSink`], so long runs can
//! stream into an empirical distribution without storing the chain.
//!
//! ```
//! use pns_core::{exact_distribution, run_unbiased_pns, tvd, PartialNeighborScheme,
//!     SamplerConfig, Method, TabularModel, WeightedEmpirical};
//!
//! let model = TabularModel::hypercube16();
//! let scheme = PartialNeighborScheme::systematic(2, 100);
//! let config = SamplerConfig::new(Method::UnbiasedPns, scheme, 200_000, 7);
//! let chain = run_unbiased_pns(&model, &config).unwrap();
//! let empirical = WeightedEmpirical::from_chain(&model, &chain).unwrap();
//! let exact = exact_distribution(&model).unwrap();
//! assert!(tvd(&empirical, &exact).unwrap() < 0.05);
//! ```

pub mod chain;
pub mod continuous;
pub mod cputime;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod models;
pub mod optim;
pub mod samplers;
pub mod select;

pub use chain::{ChainSink, JumpChain, LastState, NullSink};
pub use continuous::{
    run_mh_continuous, run_unbiased_pns_continuous, ContinuousChain, ContinuousConfig, DonutsModel,
};
pub use error::{Error, Result};
pub use metrics::{
    donuts_bias_suite, estimate, starting_distribution, tvd, BiasSuite, EmpiricalSink,
    WeightedEmpirical,
};
pub use model::{
    random_index_set, seeded_rng, symmetric_pair_offsets, systematic_index_set, ChainRng,
    ContinuousModel, DiscreteModel, Enumerable, PartialNeighborScheme, SchemeKind,
};
pub use models::{
    exact_distribution, make_qubo_random, qubo_flip_delta, BitState, ExactDistribution, QuboModel,
    TabularModel,
};
pub use optim::{
    hybrid_burn_in, run_opt_pns, run_opt_rf, run_sa, CoolingSchedule, OptimizationResult, WarmStart,
};
pub use samplers::{
    run, run_basic_pns, run_from, run_into, run_mh, run_mh_alternating, run_rf, run_rf_alternating,
    run_unbiased_pns, run_unbiased_pns_naive, BurnIn, Method, RunStats, Sampler, SamplerConfig,
};
pub use select::{
    sample_multiplicity, select_proportional, transition_weights, MultiplicitySampler,
    TransitionWeights,
};
