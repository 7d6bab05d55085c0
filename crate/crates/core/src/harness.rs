//! Config-driven experiment sweeps.
//!
//! A config names one model, a list of methods, scheme parameters, budgets
//! and a replication count. The grid is `methods × set sizes × windows ×
//! budgets`; methods that ignore the scheme get a single point per budget.
//! Every `(grid point, replication)` pair runs with a seed from
//! [`derive_seed`], so results depend only on the config.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::Deserialize;

use crate::chain::{LastState, NullSink};
use crate::continuous::{ContinuousConfig, DonutsModel};
use crate::cputime;
use crate::error::{Error, Result};
use crate::metrics::{starting_distribution, tvd, DonutsMoments, EmpiricalSink};
use crate::model::{seeded_rng, ContinuousModel, DiscreteModel, Enumerable, PartialNeighborScheme};
use crate::models::{
    exact_distribution, make_qubo_random, ExactDistribution, QuboModel, TabularModel,
};
use crate::optim::opt_pns_from;
use crate::samplers::{Method, Sampler};

/// Environment variable capping the worker pool.
pub const WORKERS_ENV: &str = "PNS_WORKERS";

pub const CSV_HEADER: [&str; 12] = [
    "method",
    "model",
    "scheme",
    "set_size",
    "window",
    "budget",
    "seed",
    "jump_size",
    "cpu_seconds",
    "burn_in_seconds",
    "metric",
    "value",
];

/// splitmix64 finalizer; a bijection on `u64`.
fn fmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `fmix(fmix(global) ^ (grid << 32 | replication))`. For a fixed global
/// seed distinct `(grid, replication)` pairs give distinct seeds, and for a
/// fixed pair distinct global seeds give distinct seeds.
pub fn derive_seed(global: u64, grid: u32, replication: u32) -> u64 {
    fmix(fmix(global) ^ ((grid as u64) << 32 | replication as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Triangle,
    Hypercube16,
    Qubo { n: usize, std: f64, seed: u64 },
    QuboFile(PathBuf),
    Donuts { mu0: f64, sigma: f64 },
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Triangle => write!(f, "triangle"),
            ModelSpec::Hypercube16 => write!(f, "hypercube16"),
            ModelSpec::Qubo { n, std, seed } => write!(f, "qubo:n={n},std={std},seed={seed}"),
            ModelSpec::QuboFile(path) => write!(f, "qubo-file:{}", path.display()),
            ModelSpec::Donuts { mu0, sigma } => write!(f, "donuts:mu0={mu0},sigma={sigma}"),
        }
    }
}

impl ModelSpec {
    /// Parses `triangle`, `hypercube16`, `qubo:n=16,std=10,seed=7`,
    /// `qubo-file:<path>` or `donuts:mu0=9,sigma=0.1`.
    pub fn parse(text: &str) -> Result<Self> {
        let (head, rest) = text.split_once(':').unwrap_or((text, ""));
        let kv = || -> Result<Vec<(&str, &str)>> {
            rest.split(',')
                .filter(|s| !s.is_empty())
                .map(|pair| {
                    pair.split_once('=')
                        .map(|(k, v)| (k.trim(), v.trim()))
                        .ok_or_else(|| Error::Parse(format!("expected key=value, got {pair:?}")))
                })
                .collect()
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Parse(format!("bad value {v:?} for {key}")))
        }
        match head {
            "triangle" if rest.is_empty() => Ok(ModelSpec::Triangle),
            "hypercube16" if rest.is_empty() => Ok(ModelSpec::Hypercube16),
            "qubo-file" if !rest.is_empty() => Ok(ModelSpec::QuboFile(rest.into())),
            "qubo" => {
                let (mut n, mut std, mut seed) = (None, None, 0);
                for (k, v) in kv()? {
                    match k {
                        "n" => n = Some(num(k, v)?),
                        "std" => std = Some(num(k, v)?),
                        "seed" => seed = num(k, v)?,
                        _ => return Err(Error::Parse(format!("unknown qubo key {k:?}"))),
                    }
                }
                match (n, std) {
                    (Some(n), Some(std)) => Ok(ModelSpec::Qubo { n, std, seed }),
                    _ => Err(Error::Parse("qubo needs n and std".into())),
                }
            }
            "donuts" => {
                let d = DonutsModel::default();
                let (mut mu0, mut sigma) = (d.mu0, d.sigma);
                for (k, v) in kv()? {
                    match k {
                        "mu0" => mu0 = num(k, v)?,
                        "sigma" => sigma = num(k, v)?,
                        _ => return Err(Error::Parse(format!("unknown donuts key {k:?}"))),
                    }
                }
                Ok(ModelSpec::Donuts { mu0, sigma })
            }
            _ => Err(Error::Parse(format!("unknown model spec {text:?}"))),
        }
    }

    pub fn load(&self) -> Result<LoadedModel> {
        Ok(match self {
            ModelSpec::Triangle => LoadedModel::Tabular(TabularModel::triangle()),
            ModelSpec::Hypercube16 => LoadedModel::Tabular(TabularModel::hypercube16()),
            ModelSpec::Qubo { n, std, seed } => {
                LoadedModel::Qubo(make_qubo_random(*n, *std, *seed)?)
            }
            ModelSpec::QuboFile(path) => LoadedModel::Qubo(QuboModel::load(path)?),
            ModelSpec::Donuts { mu0, sigma } => {
                LoadedModel::Donuts(DonutsModel::new(*mu0, *sigma)?)
            }
        })
    }
}

#[derive(Debug, Clone)]
pub enum LoadedModel {
    Tabular(TabularModel),
    Qubo(QuboModel),
    Donuts(DonutsModel),
}

impl LoadedModel {
    fn is_continuous(&self) -> bool {
        matches!(self, LoadedModel::Donuts(_))
    }

    fn neighbor_count(&self) -> usize {
        match self {
            LoadedModel::Tabular(m) => m.neighbor_count(),
            LoadedModel::Qubo(m) => m.neighbor_count(),
            LoadedModel::Donuts(_) => 0,
        }
    }

    fn dimension(&self) -> usize {
        match self {
            LoadedModel::Tabular(m) => m.dimension(),
            LoadedModel::Qubo(m) => DiscreteModel::dimension(m),
            LoadedModel::Donuts(m) => ContinuousModel::dimension(m),
        }
    }

    fn exact(&self) -> Result<ExactDistribution> {
        match self {
            LoadedModel::Tabular(m) => exact_distribution(m),
            LoadedModel::Qubo(m) => exact_distribution(m),
            LoadedModel::Donuts(_) => Err(Error::Config(
                "continuous models have no exact distribution".into(),
            )),
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            LoadedModel::Tabular(m) => labels(m),
            LoadedModel::Qubo(m) => labels(m),
            LoadedModel::Donuts(_) => Vec::new(),
        }
    }
}

fn labels<M: Enumerable>(m: &M) -> Vec<String> {
    (0..m.num_states() as usize)
        .map(|i| m.state_label(&m.state_at(i)))
        .collect()
}

/// Writes `index,state,probability` rows for an enumerable model.
pub fn write_exact<W: Write>(spec: &ModelSpec, out: W) -> Result<()> {
    let model = spec.load()?;
    let exact = model.exact()?;
    let labels = model.labels();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "state", "probability"])?;
    for (i, (label, p)) in labels.iter().zip(exact.probabilities()).enumerate() {
        w.write_record([i.to_string(), label.clone(), format_float(*p)])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// One chain per replication; metrics from its recorded samples.
    #[default]
    Chain,
    /// `replications` chains per grid point; one TVD of their end states.
    StartingDistribution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Metric {
    Tvd,
    /// Expands to one `proportion[<state>]` metric per state.
    Proportions,
    ForcedRepeats,
    BiasFirst,
    BiasSecond,
    BiasFourth,
    BiasPositive,
    StartTvd,
}

impl Metric {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "tvd" => Metric::Tvd,
            "proportions" => Metric::Proportions,
            "forced_repeats" => Metric::ForcedRepeats,
            "bias_first" => Metric::BiasFirst,
            "bias_second" => Metric::BiasSecond,
            "bias_fourth" => Metric::BiasFourth,
            "bias_positive" => Metric::BiasPositive,
            "start_tvd" => Metric::StartTvd,
            _ => return Err(Error::Config(format!("unknown metric {name:?}"))),
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Metric::Tvd => "tvd",
            Metric::Proportions => "proportions",
            Metric::ForcedRepeats => "forced_repeats",
            Metric::BiasFirst => "bias_first",
            Metric::BiasSecond => "bias_second",
            Metric::BiasFourth => "bias_fourth",
            Metric::BiasPositive => "bias_positive",
            Metric::StartTvd => "start_tvd",
        }
    }

    fn is_continuous(&self) -> bool {
        matches!(
            self,
            Metric::BiasFirst | Metric::BiasSecond | Metric::BiasFourth | Metric::BiasPositive
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptSteps {
    Fixed(u64),
    /// `⌊budget / divisor⌋`.
    Fraction(u64),
}

impl OptSteps {
    fn resolve(&self, budget: u64) -> u64 {
        match *self {
            OptSteps::Fixed(n) => n,
            OptSteps::Fraction(d) => budget / d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurnInSpec {
    None,
    /// `None` discards as many samples as the budget.
    Discard(Option<u64>),
    Optimize {
        steps: OptSteps,
        best_state: bool,
        set_size: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub output: PathBuf,
    pub seed: u64,
    pub replications: u32,
    pub budgets: Vec<u64>,
    pub methods: Vec<Method>,
    pub metrics: Vec<Metric>,
    pub mode: Mode,
    pub model: ModelSpec,
    pub scheme: SchemeChoice,
    pub set_sizes: Vec<usize>,
    pub windows: Vec<u64>,
    pub num_pairs: usize,
    pub step_std: f64,
    pub burn_in: BurnInSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Full,
    Systematic,
    Random,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    model: RawModel,
    #[serde(default)]
    scheme: RawScheme,
    #[serde(default)]
    burn_in: RawBurnIn,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    output: PathBuf,
    #[serde(default)]
    seed: u64,
    #[serde(default = "one")]
    replications: u32,
    budgets: Vec<u64>,
    methods: Vec<String>,
    metrics: Option<Vec<String>>,
    #[serde(default)]
    mode: RawMode,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawMode {
    #[default]
    Chain,
    StartingDistribution,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawModel {
    Triangle,
    Hypercube16,
    Qubo {
        n: usize,
        std: f64,
        #[serde(default)]
        seed: u64,
    },
    QuboFile {
        path: PathBuf,
    },
    Donuts {
        mu0: Option<f64>,
        sigma: Option<f64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    kind: Option<String>,
    set_size: Option<OneOrMany<usize>>,
    window: Option<OneOrMany<u64>>,
    num_pairs: Option<usize>,
    step_std: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBurnIn {
    kind: Option<String>,
    steps: Option<u64>,
    divisor: Option<u64>,
    warm_start: Option<String>,
    set_size: Option<usize>,
}

const DEFAULT_WINDOW: u64 = 100;
const DEFAULT_NUM_PAIRS: usize = 25;

impl ExperimentConfig {
    /// Parses and validates a config; relative `output` and `qubo_file`
    /// paths stay relative to the working directory.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let config = Self::from_raw(raw)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside resolve against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: RawConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_raw(raw)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if config.output.is_relative() {
            config.output = base.join(&config.output);
        }
        if let ModelSpec::QuboFile(p) = &mut config.model {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let e = raw.experiment;
        let model = match raw.model {
            RawModel::Triangle => ModelSpec::Triangle,
            RawModel::Hypercube16 => ModelSpec::Hypercube16,
            RawModel::Qubo { n, std, seed } => ModelSpec::Qubo { n, std, seed },
            RawModel::QuboFile { path } => ModelSpec::QuboFile(path),
            RawModel::Donuts { mu0, sigma } => {
                let d = DonutsModel::default();
                ModelSpec::Donuts {
                    mu0: mu0.unwrap_or(d.mu0),
                    sigma: sigma.unwrap_or(d.sigma),
                }
            }
        };
        let mode = match e.mode {
            RawMode::Chain => Mode::Chain,
            RawMode::StartingDistribution => Mode::StartingDistribution,
        };
        let methods = e
            .methods
            .iter()
            .map(|m| Method::parse(m).ok_or_else(|| Error::Config(format!("unknown method {m:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let metrics = match e.metrics {
            Some(names) => names
                .iter()
                .map(|n| Metric::parse(n))
                .collect::<Result<_>>()?,
            None => match (&model, mode) {
                (_, Mode::StartingDistribution) => vec![Metric::StartTvd],
                (ModelSpec::Donuts { .. }, _) => vec![
                    Metric::BiasFirst,
                    Metric::BiasSecond,
                    Metric::BiasFourth,
                    Metric::BiasPositive,
                ],
                _ => vec![Metric::Tvd],
            },
        };
        let s = raw.scheme;
        let scheme = match s.kind.as_deref().unwrap_or("full") {
            "full" => SchemeChoice::Full,
            "systematic" => SchemeChoice::Systematic,
            "random" => SchemeChoice::Random,
            other => return Err(Error::Config(format!("unknown scheme kind {other:?}"))),
        };
        let b = raw.burn_in;
        let burn_in = match b.kind.as_deref().unwrap_or("discard") {
            "none" => BurnInSpec::None,
            "discard" => BurnInSpec::Discard(b.steps),
            "optimize" => {
                let steps = match (b.steps, b.divisor) {
                    (Some(n), None) => OptSteps::Fixed(n),
                    (None, Some(d)) if d > 0 => OptSteps::Fraction(d),
                    _ => {
                        return Err(Error::Config(
                            "optimize burn-in needs exactly one of steps or a positive divisor"
                                .into(),
                        ))
                    }
                };
                let best_state = match b.warm_start.as_deref().unwrap_or("final") {
                    "final" => false,
                    "best" => true,
                    other => return Err(Error::Config(format!("unknown warm_start {other:?}"))),
                };
                BurnInSpec::Optimize {
                    steps,
                    best_state,
                    set_size: b.set_size,
                }
            }
            other => return Err(Error::Config(format!("unknown burn-in kind {other:?}"))),
        };
        Ok(Self {
            output: e.output,
            seed: e.seed,
            replications: e.replications,
            budgets: e.budgets,
            methods,
            metrics,
            mode,
            model,
            scheme,
            set_sizes: s.set_size.map(OneOrMany::into_vec).unwrap_or_default(),
            windows: s
                .window
                .map(OneOrMany::into_vec)
                .unwrap_or_else(|| vec![DEFAULT_WINDOW]),
            num_pairs: s.num_pairs.unwrap_or(DEFAULT_NUM_PAIRS),
            step_std: s.step_std.unwrap_or(1.0),
            burn_in,
        })
    }

    fn scheme_for(&self, set_size: usize, window: u64) -> PartialNeighborScheme {
        match self.scheme {
            SchemeChoice::Full => PartialNeighborScheme::full(window),
            SchemeChoice::Systematic => PartialNeighborScheme::systematic(set_size, window),
            SchemeChoice::Random => PartialNeighborScheme::random(set_size, window),
        }
    }

    /// Checks everything that can be checked without running a chain.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.budgets.is_empty() {
            return bad("budget list is empty".into());
        }
        if self.budgets.contains(&0) {
            return bad("budgets must be positive".into());
        }
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        if self.metrics.is_empty() {
            return bad("metric list is empty".into());
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if self.windows.is_empty() || self.windows.contains(&0) {
            return bad("windows must be a nonempty list of positive values".into());
        }
        let model = self.model.load()?;
        let continuous = model.is_continuous();
        for metric in &self.metrics {
            let ok = match self.mode {
                Mode::StartingDistribution => *metric == Metric::StartTvd,
                Mode::Chain => *metric != Metric::StartTvd && metric.is_continuous() == continuous,
            };
            if !ok {
                return bad(format!(
                    "metric {} does not apply to model {} in this mode",
                    metric.name(),
                    self.model
                ));
            }
        }
        if continuous {
            if self.mode == Mode::StartingDistribution {
                return bad("starting-distribution mode needs an enumerable model".into());
            }
            for m in &self.methods {
                if !matches!(m, Method::Mh | Method::UnbiasedPns) {
                    return bad(format!(
                        "method {} has no continuous form; use mh or unbiased_pns",
                        m.name()
                    ));
                }
            }
            if self.num_pairs == 0 || !(self.step_std > 0.0) {
                return bad("num_pairs and step_std must be positive".into());
            }
            if matches!(self.burn_in, BurnInSpec::Optimize { .. }) {
                return bad("optimize burn-in needs a discrete model".into());
            }
        } else {
            let needs_exact = self
                .metrics
                .iter()
                .any(|m| matches!(m, Metric::Tvd | Metric::StartTvd | Metric::Proportions));
            if needs_exact {
                model.exact()?;
            }
            for point in self.grid(&model) {
                let scheme = self.scheme_for(point.set_size, point.window.max(1));
                let sampler = crate::samplers::SamplerConfig::new(point.method, scheme, 1, 0);
                match &model {
                    LoadedModel::Tabular(m) => sampler.validate(m)?,
                    LoadedModel::Qubo(m) => sampler.validate(m)?,
                    LoadedModel::Donuts(_) => unreachable!("checked above"),
                }
            }
            if let BurnInSpec::Optimize {
                set_size: Some(n), ..
            } = self.burn_in
            {
                if n == 0 || n > model.neighbor_count() {
                    return bad(format!("optimizer set size {n} out of range"));
                }
            }
        }
        if u32::try_from(self.grid(&model).len()).is_err() {
            return bad("grid too large".into());
        }
        Ok(())
    }

    fn grid(&self, model: &LoadedModel) -> Vec<GridPoint> {
        let dim = model.dimension();
        let set_sizes = if self.set_sizes.is_empty() || self.scheme == SchemeChoice::Full {
            vec![if model.is_continuous() {
                2 * self.num_pairs
            } else {
                dim
            }]
        } else {
            self.set_sizes.clone()
        };
        let mut grid = Vec::new();
        for &method in &self.methods {
            let scheme_free = matches!(method, Method::Mh | Method::Rf);
            let uses_window = !scheme_free && method != Method::BasicPns;
            let sizes: &[usize] = if scheme_free { &[0] } else { &set_sizes };
            let windows: &[u64] = if uses_window { &self.windows } else { &[0] };
            for &set_size in sizes {
                for &window in windows {
                    for &budget in &self.budgets {
                        grid.push(GridPoint {
                            method,
                            set_size: if scheme_free {
                                model.neighbor_count()
                            } else {
                                set_size
                            },
                            window,
                            budget,
                            scheme: if scheme_free {
                                "full"
                            } else if model.is_continuous() {
                                "random_pairs"
                            } else {
                                match self.scheme {
                                    SchemeChoice::Full => "full",
                                    SchemeChoice::Systematic => "systematic",
                                    SchemeChoice::Random => "random",
                                }
                            },
                        });
                    }
                }
            }
        }
        grid
    }

    fn discard_count(&self, budget: u64) -> u64 {
        match self.burn_in {
            BurnInSpec::Discard(n) => n.unwrap_or(budget),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GridPoint {
    method: Method,
    set_size: usize,
    window: u64,
    budget: u64,
    scheme: &'static str,
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub model: String,
    pub scheme: String,
    pub set_size: usize,
    pub window: u64,
    pub budget: u64,
    pub seed: u64,
    pub jump_size: u64,
    pub cpu_seconds: f64,
    pub burn_in_seconds: f64,
    pub metric: String,
    pub value: f64,
}

/// 17 significant digits.
fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl ResultRow {
    fn record(&self) -> [String; 12] {
        [
            self.method.clone(),
            self.model.clone(),
            self.scheme.clone(),
            self.set_size.to_string(),
            self.window.to_string(),
            self.budget.to_string(),
            self.seed.to_string(),
            self.jump_size.to_string(),
            format_float(self.cpu_seconds),
            format_float(self.burn_in_seconds),
            self.metric.clone(),
            format_float(self.value),
        ]
    }
}

struct JobOutput {
    seed: u64,
    jump_size: u64,
    cpu_seconds: f64,
    burn_in_seconds: f64,
    values: Vec<(String, f64)>,
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    model: &'a LoadedModel,
    exact: Option<&'a ExactDistribution>,
    labels: &'a [String],
}

fn run_discrete_chain<M: Enumerable>(
    ctx: &Context<'_>,
    model: &M,
    point: &GridPoint,
    seed: u64,
) -> Result<JobOutput> {
    let cfg = ctx.config;
    let scheme = cfg.scheme_for(point.set_size, point.window.max(1));
    let (start, rng, burn_secs) = warm_start(cfg, model, &scheme, point.budget, seed)?;
    let mut sampler = Sampler::new(model, point.method, scheme, start, rng)?;
    let discard = cfg.discard_count(point.budget);
    let (res, discard_secs) = cputime::measure(|| sampler.advance(discard, &mut NullSink));
    res?;
    let before = sampler.stats();
    let mut sink = EmpiricalSink::new(model)?;
    let (res, secs) = cputime::measure(|| sampler.advance(point.budget, &mut sink));
    res?;
    let after = sampler.stats();
    let mut values = Vec::new();
    for metric in &cfg.metrics {
        match metric {
            Metric::Tvd => {
                let exact = ctx.exact.expect("exact distribution prepared");
                values.push(("tvd".into(), tvd(&sink.empirical, exact)?));
            }
            Metric::Proportions => {
                for (i, label) in ctx.labels.iter().enumerate() {
                    values.push((
                        format!("proportion[{label}]"),
                        sink.empirical.probability(i),
                    ));
                }
            }
            Metric::ForcedRepeats => values.push((
                "forced_repeats".into(),
                (after.forced_repeats - before.forced_repeats) as f64,
            )),
            _ => unreachable!("validated metric"),
        }
    }
    Ok(JobOutput {
        seed,
        jump_size: after.jump_size - before.jump_size,
        cpu_seconds: secs.max(f64::MIN_POSITIVE),
        burn_in_seconds: burn_secs + discard_secs,
        values,
    })
}

/// Random start, then the optimizer if configured. Returns the start state,
/// the stream positioned after burn-in draws, and the optimizer's CPU time.
fn warm_start<M: DiscreteModel>(
    cfg: &ExperimentConfig,
    model: &M,
    scheme: &PartialNeighborScheme,
    budget: u64,
    seed: u64,
) -> Result<(M::State, crate::model::ChainRng, f64)> {
    let mut rng = seeded_rng(seed);
    let start = model.random_state(&mut rng);
    let BurnInSpec::Optimize {
        steps,
        best_state,
        set_size,
    } = cfg.burn_in
    else {
        return Ok((start, rng, 0.0));
    };
    let n = set_size.unwrap_or_else(|| crate::optim::default_opt_set_size(model, scheme));
    let (res, secs) =
        cputime::measure(|| opt_pns_from(model, n, steps.resolve(budget), start, &mut rng));
    let opt = res?;
    let start = if best_state {
        opt.best_state
    } else {
        opt.final_state
    };
    Ok((start, rng, secs))
}

fn run_starting<M: Enumerable>(
    ctx: &Context<'_>,
    model: &M,
    point: &GridPoint,
    grid_index: u32,
) -> Result<JobOutput> {
    let cfg = ctx.config;
    let scheme = cfg.scheme_for(point.set_size, point.window.max(1));
    let discard = cfg.discard_count(point.budget);
    let mut last_states = Vec::with_capacity(cfg.replications as usize);
    let (mut cpu, mut burn, mut jumps) = (0.0, 0.0, 0);
    for r in 0..cfg.replications {
        let seed = derive_seed(cfg.seed, grid_index, r);
        let (start, rng, burn_secs) = warm_start(cfg, model, &scheme, point.budget, seed)?;
        let mut sampler = Sampler::new(model, point.method, scheme, start, rng)?;
        let (res, discard_secs) = cputime::measure(|| sampler.advance(discard, &mut NullSink));
        res?;
        let before = sampler.stats().jump_size;
        let mut last = LastState::default();
        let (res, secs) = cputime::measure(|| sampler.advance(point.budget, &mut last));
        res?;
        jumps += sampler.stats().jump_size - before;
        cpu += secs;
        burn += burn_secs + discard_secs;
        last_states.push(last.0.expect("positive budget records a state"));
    }
    let exact = ctx.exact.expect("exact distribution prepared");
    Ok(JobOutput {
        seed: derive_seed(cfg.seed, grid_index, 0),
        jump_size: jumps,
        cpu_seconds: cpu.max(f64::MIN_POSITIVE),
        burn_in_seconds: burn,
        values: vec![(
            "start_tvd".into(),
            starting_distribution(model, &last_states, exact)?,
        )],
    })
}

fn run_donuts(
    ctx: &Context<'_>,
    model: &DonutsModel,
    point: &GridPoint,
    seed: u64,
) -> Result<JobOutput> {
    let cfg = ctx.config;
    let run = ContinuousConfig::new(point.budget, seed).with_burn_in(0);
    let discard = cfg.discard_count(point.budget);
    let mut moments = DonutsMoments::default();
    let (stats, burn_secs, secs) = match point.method {
        Method::Mh => {
            let mut chain = crate::continuous::MhContinuous::new(
                model,
                cfg.step_std,
                vec![0.0; 2],
                seeded_rng(run.seed),
            )?;
            let ((), burn) = cputime::measure(|| chain.advance(discard, &mut NullSink));
            let before = chain.stats().jump_size;
            let ((), secs) = cputime::measure(|| chain.advance(point.budget, &mut moments));
            (chain.stats().jump_size - before, burn, secs)
        }
        Method::UnbiasedPns => {
            let mut chain = crate::continuous::PnsContinuous::new(
                model,
                cfg.num_pairs,
                point.window,
                vec![0.0; 2],
                seeded_rng(run.seed),
            )?;
            let (res, burn) = cputime::measure(|| chain.advance(discard, &mut NullSink));
            res?;
            let before = chain.stats().jump_size;
            let (res, secs) = cputime::measure(|| chain.advance(point.budget, &mut moments));
            res?;
            (chain.stats().jump_size - before, burn, secs)
        }
        _ => unreachable!("validated method"),
    };
    let bias = moments.bias(crate::metrics::donuts_reference(model.mu0, model.sigma))?;
    let values = cfg
        .metrics
        .iter()
        .map(|m| {
            let v = match m {
                Metric::BiasFirst => bias.first,
                Metric::BiasSecond => bias.second,
                Metric::BiasFourth => bias.fourth,
                Metric::BiasPositive => bias.positive_rate,
                _ => unreachable!("validated metric"),
            };
            (m.name().to_string(), v)
        })
        .collect();
    Ok(JobOutput {
        seed,
        jump_size: stats,
        cpu_seconds: secs.max(f64::MIN_POSITIVE),
        burn_in_seconds: burn_secs,
        values,
    })
}

fn run_job(ctx: &Context<'_>, point: &GridPoint, grid_index: u32, rep: u32) -> Result<JobOutput> {
    let seed = derive_seed(ctx.config.seed, grid_index, rep);
    match (ctx.config.mode, ctx.model) {
        (Mode::Chain, LoadedModel::Tabular(m)) => run_discrete_chain(ctx, m, point, seed),
        (Mode::Chain, LoadedModel::Qubo(m)) => run_discrete_chain(ctx, m, point, seed),
        (Mode::Chain, LoadedModel::Donuts(m)) => run_donuts(ctx, m, point, seed),
        (Mode::StartingDistribution, LoadedModel::Tabular(m)) => {
            run_starting(ctx, m, point, grid_index)
        }
        (Mode::StartingDistribution, LoadedModel::Qubo(m)) => {
            run_starting(ctx, m, point, grid_index)
        }
        (Mode::StartingDistribution, LoadedModel::Donuts(_)) => {
            unreachable!("validated mode")
        }
    }
}

fn rows_for(ctx: &Context<'_>, point: &GridPoint, out: JobOutput) -> Vec<ResultRow> {
    out.values
        .into_iter()
        .map(|(metric, value)| ResultRow {
            method: point.method.name().to_string(),
            model: ctx.config.model.to_string(),
            scheme: point.scheme.to_string(),
            set_size: point.set_size,
            window: point.window,
            budget: point.budget,
            seed: out.seed,
            jump_size: out.jump_size,
            cpu_seconds: out.cpu_seconds,
            burn_in_seconds: out.burn_in_seconds,
            metric,
            value,
        })
        .collect()
}

fn worker_count() -> Option<usize> {
    let raw = std::env::var(WORKERS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            log::warn!("ignoring {WORKERS_ENV}={raw:?}");
            None
        }
    }
}

/// Runs every job and returns rows in grid order. `on_row` sees each job's
/// rows as soon as it finishes, in completion order.
pub fn run_rows(
    config: &ExperimentConfig,
    on_row: impl Fn(&[ResultRow]) + Sync,
) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let model = config.model.load()?;
    let exact = if !model.is_continuous()
        && config
            .metrics
            .iter()
            .any(|m| matches!(m, Metric::Tvd | Metric::StartTvd))
    {
        Some(model.exact()?)
    } else {
        None
    };
    let labels = if config.metrics.contains(&Metric::Proportions) {
        model.labels()
    } else {
        Vec::new()
    };
    let ctx = Context {
        config,
        model: &model,
        exact: exact.as_ref(),
        labels: &labels,
    };
    let grid = config.grid(&model);
    let reps = match config.mode {
        Mode::Chain => config.replications,
        Mode::StartingDistribution => 1,
    };
    let jobs: Vec<(u32, u32)> = (0..grid.len() as u32)
        .flat_map(|g| (0..reps).map(move |r| (g, r)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    log::info!("{} jobs over {} grid points", jobs.len(), grid.len());
    let results: Vec<Vec<ResultRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, r)| {
                let point = &grid[g as usize];
                let out = run_job(&ctx, point, g, r)?;
                let rows = rows_for(&ctx, point, out);
                on_row(&rows);
                Ok(rows)
            })
            .collect::<Result<_>>()
    })?;
    Ok(results.into_iter().flatten().collect())
}

/// Runs the sweep, appending rows to `<output>.partial` as jobs finish and
/// writing the grid-ordered file at `output` at the end.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let output = &config.output;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let partial = output.with_extension("partial");
    let file = fs::File::create(&partial).map_err(|e| Error::io(&partial, e))?;
    let (tx, rx) = mpsc::channel::<Vec<ResultRow>>();
    let rows = std::thread::scope(|scope| {
        let partial = &partial;
        let writer = scope.spawn(move || -> Result<()> {
            let mut w = csv::Writer::from_writer(file);
            w.write_record(CSV_HEADER)?;
            w.flush().map_err(|e| Error::io(partial, e))?;
            for batch in rx {
                for row in &batch {
                    w.write_record(row.record())?;
                }
                w.flush().map_err(|e| Error::io(partial, e))?;
            }
            Ok(())
        });
        let tx = std::sync::Mutex::new(tx);
        let rows = run_rows(config, |rows| {
            let _ = tx
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .send(rows.to_vec());
        });
        drop(tx);
        let written = writer.join().expect("writer thread panicked");
        let rows = rows?;
        written?;
        Ok::<_, Error>(rows)
    })?;
    write_rows(output, &rows)?;
    fs::remove_file(&partial).map_err(|e| Error::io(&partial, e))?;
    Ok(rows)
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
