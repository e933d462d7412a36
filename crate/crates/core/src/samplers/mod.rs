//! Runnable deterministic-scan samplers for the worked models, bounded test functions, and a
//! paired-chain estimator of `‖Pⁿf‖²` for checking rate bounds against simulation.
//!
//! Every chain draws from its own ChaCha8 stream keyed by `(master seed, chain index)`, so
//! results do not depend on how rayon schedules the chains.

mod bayes;
mod decay;
mod finite;
mod gap_proxy;
mod nig;
mod ou;
pub mod stats;

pub use bayes::{BayesMode, BayesSampler, BayesState};
pub use decay::{estimate_l2_decay, stationary_moments, Centering, DecayConfig, DecayEstimate, StartSource};
pub use finite::{FiniteChainSampler, FiniteScan};
pub use gap_proxy::{estimate_gibbs_gap, GapProxy};
pub use nig::{NigMode, NigSampler, NigState};
pub use ou::{brownian_bridge, ito_sum, ou_log_acceptance, trapezoid_sq, OuSampler, OuState, DEFAULT_OU_BURN_IN};

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

pub type ChainRng = ChaCha8Rng;

/// Stream `chain` of the generator seeded by `master`.
pub fn chain_rng(master: u64, chain: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(chain);
    rng
}

/// Where a chain's randomness comes from and how far it has advanced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub master: u64,
    pub chain: u64,
    pub step: u64,
}

pub trait Sampler: Send + Sync {
    type State: Clone + Send + Sync;

    fn coord_names(&self) -> Vec<String>;

    /// Deterministic-looking start used for traces; not necessarily stationary.
    fn initial(&self, rng: &mut ChainRng) -> Self::State;

    /// A draw from the stationary law, exact when [`Sampler::exact_stationary`] holds,
    /// otherwise `initial` followed by [`Sampler::burn_in`] steps.
    fn stationary(&self, rng: &mut ChainRng) -> Self::State {
        let mut s = self.initial(rng);
        for _ in 0..self.burn_in() {
            self.step(&mut s, rng);
        }
        s
    }

    fn exact_stationary(&self) -> bool {
        false
    }

    fn burn_in(&self) -> usize {
        0
    }

    /// One full deterministic-scan sweep.
    fn step(&self, state: &mut Self::State, rng: &mut ChainRng);

    fn coord(&self, state: &Self::State, i: usize) -> f64;

    fn coords(&self, state: &Self::State) -> Vec<f64> {
        (0..self.coord_names().len()).map(|i| self.coord(state, i)).collect()
    }

    /// `Π(f)` when known in closed form.
    fn analytic_mean(&self, _f: &TestFn) -> Option<f64> {
        None
    }

    /// Named run summaries such as acceptance rates.
    fn diagnostics(&self, _state: &Self::State) -> Vec<(String, f64)> {
        Vec::new()
    }

    fn describe(&self) -> String;
}

/// Identity kernel with the same stationary law; a negative control for decay checks.
#[derive(Clone, Debug)]
pub struct Frozen<S>(pub S);

impl<S: Sampler> Sampler for Frozen<S> {
    type State = S::State;

    fn coord_names(&self) -> Vec<String> {
        self.0.coord_names()
    }
    fn initial(&self, rng: &mut ChainRng) -> Self::State {
        self.0.initial(rng)
    }
    fn stationary(&self, rng: &mut ChainRng) -> Self::State {
        self.0.stationary(rng)
    }
    fn exact_stationary(&self) -> bool {
        self.0.exact_stationary()
    }
    fn burn_in(&self) -> usize {
        self.0.burn_in()
    }
    fn step(&self, _state: &mut Self::State, _rng: &mut ChainRng) {}
    fn coord(&self, state: &Self::State, i: usize) -> f64 {
        self.0.coord(state, i)
    }
    fn analytic_mean(&self, f: &TestFn) -> Option<f64> {
        self.0.analytic_mean(f)
    }
    fn describe(&self) -> String {
        format!("frozen({})", self.0.describe())
    }
}

/// Test functions of the chain coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFn {
    /// `tanh((x_coord - shift)/scale)`.
    Tanh { coord: usize, scale: f64, shift: f64 },
    /// Smoothed indicator of `[lo, hi]`: `σ((x-lo)/w) - σ((x-hi)/w)`.
    Band { coord: usize, lo: f64, hi: f64, width: f64 },
    /// Values indexed by a finite state, read from coordinate 0.
    Table { values: Vec<f64> },
    /// The raw coordinate; unbounded, so rejected by the estimator.
    Linear { coord: usize },
}

fn sigmoid(x: f64) -> f64 {
    0.5 * (1.0 + (0.5 * x).tanh())
}

impl TestFn {
    pub fn tanh(coord: usize) -> Self {
        TestFn::Tanh { coord, scale: 1.0, shift: 0.0 }
    }

    pub fn eval(&self, coords: &dyn Fn(usize) -> f64) -> f64 {
        match self {
            TestFn::Tanh { coord, scale, shift } => ((coords(*coord) - shift) / scale).tanh(),
            TestFn::Band { coord, lo, hi, width } => {
                let x = coords(*coord);
                sigmoid((x - lo) / width) - sigmoid((x - hi) / width)
            }
            TestFn::Table { values } => {
                let i = coords(0) as usize;
                values.get(i).copied().unwrap_or(f64::NAN)
            }
            TestFn::Linear { coord } => coords(*coord),
        }
    }

    /// `sup f - inf f` over the real line (or the table).
    pub fn osc(&self) -> f64 {
        match self {
            TestFn::Tanh { .. } => 2.0,
            TestFn::Band { lo, hi, width, .. } => ((hi - lo) / (4.0 * width)).tanh(),
            TestFn::Table { values } => {
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                max - min
            }
            TestFn::Linear { .. } => f64::INFINITY,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let coord_ok = |c: &usize| {
            if *c < dim {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("coordinate {c} out of range for {dim} coordinates")))
            }
        };
        match self {
            TestFn::Tanh { coord, scale, shift } => {
                coord_ok(coord)?;
                if !(*scale > 0.0) || !shift.is_finite() {
                    return Err(Error::InvalidParameter("tanh needs scale > 0 and a finite shift".into()));
                }
            }
            TestFn::Band { coord, lo, hi, width } => {
                coord_ok(coord)?;
                if !(lo < hi) || !(*width > 0.0) {
                    return Err(Error::InvalidParameter("band needs lo < hi and width > 0".into()));
                }
            }
            TestFn::Table { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("table values must be finite and non-empty".into()));
                }
            }
            TestFn::Linear { coord } => {
                coord_ok(coord)?;
                return Err(Error::Precondition("test function must be bounded; linear is not".into()));
            }
        }
        Ok(())
    }

    /// Parses `tanh:NAME`, `tanh:NAME:SCALE:SHIFT`, `band:NAME:LO:HI:WIDTH` or `linear:NAME`.
    pub fn parse(spec: &str, names: &[String]) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::InvalidParameter(format!("cannot parse test function {spec:?}"));
        let coord = |name: &str| {
            names.iter().position(|n| n == name).ok_or_else(|| {
                Error::InvalidParameter(format!("unknown coordinate {name:?}; available: {}", names.join(", ")))
            })
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let f = match parts.as_slice() {
            ["tanh", c] => TestFn::tanh(coord(c)?),
            ["tanh", c, scale, shift] => TestFn::Tanh { coord: coord(c)?, scale: num(scale)?, shift: num(shift)? },
            ["band", c, lo, hi, w] => TestFn::Band { coord: coord(c)?, lo: num(lo)?, hi: num(hi)?, width: num(w)? },
            ["linear", c] => TestFn::Linear { coord: coord(c)? },
            _ => return Err(bad()),
        };
        Ok(f)
    }
}

impl fmt::Display for TestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFn::Tanh { coord, scale, shift } => write!(f, "tanh((x{coord}-{shift})/{scale})"),
            TestFn::Band { coord, lo, hi, width } => write!(f, "band(x{coord},{lo},{hi},{width})"),
            TestFn::Table { values } => write!(f, "table[{}]", values.len()),
            TestFn::Linear { coord } => write!(f, "x{coord}"),
        }
    }
}

/// Coordinates of one chain, recorded at every step including the start.
#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub lineage: Lineage,
    pub diagnostics: Vec<(String, f64)>,
}

/// Runs chain `chain` of master seed `master` for `steps` sweeps from `Sampler::initial`.
pub fn run_chain<S: Sampler>(sampler: &S, master: u64, chain: u64, steps: usize) -> Trace {
    let mut rng = chain_rng(master, chain);
    let mut state = sampler.initial(&mut rng);
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(sampler.coords(&state));
    for _ in 0..steps {
        sampler.step(&mut state, &mut rng);
        rows.push(sampler.coords(&state));
    }
    Trace {
        names: sampler.coord_names(),
        rows,
        lineage: Lineage { master, chain, step: steps as u64 },
        diagnostics: sampler.diagnostics(&state),
    }
}

/// Gaussian random-walk Metropolis acceptance for a log-density difference.
#[inline]
pub(crate) fn metropolis_accept(log_ratio: f64, rng: &mut ChainRng) -> bool {
    use rand::Rng;
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}
