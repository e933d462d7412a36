use super::stats::quantile;
use super::{chain_rng, Sampler, TestFn};
use crate::error::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

const START_STREAM: u64 = 0;
const CHAIN_STREAM: u64 = 1 << 40;
const PRERUN_STREAM: u64 = 2 << 40;
const BOOT_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;
const BURN_IN_CHAINS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    Known(f64),
    Analytic(f64),
    /// Mean of this many stationary draws.
    PreRun(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSource {
    Exact,
    /// Thinned states of `chains` long chains, each after `burn_in` discarded sweeps.
    BurnIn { burn_in: usize, chains: usize, thin: usize },
}

#[derive(Clone, Debug)]
pub struct DecayConfig {
    pub n_grid: Vec<usize>,
    pub starts: usize,
    pub bootstrap: usize,
    pub seed: u64,
    /// Overrides both the analytic mean and the pre-run.
    pub known_mean: Option<f64>,
    /// Spacing of starts taken from burn-in chains.
    pub thin: usize,
}

impl DecayConfig {
    pub fn up_to(n_max: usize, starts: usize, seed: u64) -> Self {
        DecayConfig { n_grid: (0..=n_max).collect(), starts, bootstrap: 200, seed, known_mean: None, thin: 10 }
    }
}

/// Estimates of `‖Pⁿf‖²/‖f‖²_osc` with bootstrap percentile intervals over starts.
#[derive(Clone, Debug, Serialize)]
pub struct DecayEstimate {
    pub n: Vec<usize>,
    pub mean: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Bootstrap standard error of `mean`.
    pub se: Vec<f64>,
    pub starts: usize,
    pub f: String,
    pub osc: f64,
    pub center: f64,
    pub centering: Centering,
    pub start_source: StartSource,
    pub sampler: String,
}

impl DecayEstimate {
    /// No later estimate sits clearly above an earlier one.
    pub fn monotone_within_ci(&self) -> bool {
        let mut min_high = f64::INFINITY;
        for (lo, hi) in self.ci_low.iter().zip(&self.ci_high) {
            if *lo > min_high {
                return false;
            }
            min_high = min_high.min(*hi);
        }
        true
    }
}

fn stationary_starts<S: Sampler>(s: &S, count: usize, seed: u64, stream: u64, thin: usize) -> (Vec<S::State>, StartSource) {
    if s.exact_stationary() {
        let starts = (0..count)
            .into_par_iter()
            .map(|i| s.stationary(&mut chain_rng(seed, stream + i as u64)))
            .collect();
        return (starts, StartSource::Exact);
    }
    let per_chain = count.div_ceil(BURN_IN_CHAINS);
    let thin = thin.max(1);
    let blocks: Vec<Vec<S::State>> = (0..BURN_IN_CHAINS)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(seed, stream + c as u64);
            let mut state = s.stationary(&mut rng);
            let mut out = Vec::with_capacity(per_chain);
            for _ in 0..per_chain {
                for _ in 0..thin {
                    s.step(&mut state, &mut rng);
                }
                out.push(state.clone());
            }
            out
        })
        .collect();
    let mut starts: Vec<S::State> = blocks.into_iter().flatten().collect();
    starts.truncate(count);
    (starts, StartSource::BurnIn { burn_in: s.burn_in(), chains: BURN_IN_CHAINS, thin })
}

fn eval<S: Sampler>(s: &S, f: &TestFn, state: &S::State) -> f64 {
    f.eval(&|i| s.coord(state, i))
}

/// Mean and variance of `f` under the stationary law from independent draws, plus the
/// standard error of the variance estimate.
pub fn stationary_moments<S: Sampler>(s: &S, f: &TestFn, samples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    if samples < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    let (states, _) = stationary_starts(s, samples, seed, PRERUN_STREAM, 10);
    let v: Vec<f64> = states.iter().map(|z| eval(s, f, z)).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = sq.iter().sum::<f64>() / (n - 1.0);
    let var_of_sq = sq.iter().map(|q| (q - var).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var, (var_of_sq / n).sqrt()))
}

/// Paired-chain estimate: from each stationary start run two independent chains and average
/// `f̄(Zₙ¹)f̄(Zₙ²)` with `f̄ = f - Π(f)`, which is unbiased for `‖Pⁿf̄‖²`.
pub fn estimate_l2_decay<S: Sampler>(s: &S, f: &TestFn, cfg: &DecayConfig) -> Result<DecayEstimate> {
    f.validate(s.coord_names().len())?;
    let osc = f.osc();
    if !(osc > 0.0 && osc.is_finite()) {
        return Err(Error::Precondition(format!("test function {f} has oscillation {osc}")));
    }
    if cfg.starts < 2 || cfg.bootstrap < 2 {
        return Err(Error::Precondition("need at least two starts and two bootstrap replicates".into()));
    }
    let mut grid = cfg.n_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let n_max = *grid.last().ok_or_else(|| Error::Precondition("empty n grid".into()))?;

    let centering = match (cfg.known_mean, s.analytic_mean(f)) {
        (Some(m), _) => Centering::Known(m),
        (None, Some(m)) => Centering::Analytic(m),
        (None, None) => Centering::PreRun(10 * cfg.starts),
    };
    let center = match centering {
        Centering::Known(m) | Centering::Analytic(m) => m,
        Centering::PreRun(k) => stationary_moments(s, f, k, cfg.seed ^ BOOT_SEED_MIX)?.0,
    };

    let (starts, start_source) = stationary_starts(s, cfg.starts, cfg.seed, START_STREAM, cfg.thin);
    let g = grid.len();
    let products: Vec<f64> = starts
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, z)| {
            let mut r1 = chain_rng(cfg.seed, CHAIN_STREAM + 2 * i as u64);
            let mut r2 = chain_rng(cfg.seed, CHAIN_STREAM + 2 * i as u64 + 1);
            let (mut a, mut b) = (z.clone(), z.clone());
            let mut row = Vec::with_capacity(g);
            let mut k = 0;
            for n in 0..=n_max {
                if n > 0 {
                    s.step(&mut a, &mut r1);
                    s.step(&mut b, &mut r2);
                }
                if grid[k] == n {
                    row.push((eval(s, f, &a) - center) * (eval(s, f, &b) - center));
                    k += 1;
                }
            }
            row
        })
        .collect();
    let m = starts.len();
    let scale = 1.0 / (osc * osc);
    let column_mean = |idx: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        let mut acc = vec![0.0; g];
        let mut count = 0usize;
        for i in idx {
            for (a, v) in acc.iter_mut().zip(&products[i * g..(i + 1) * g]) {
                *a += v;
            }
            count += 1;
        }
        acc.iter().map(|a| a / count as f64 * scale).collect()
    };
    let mean = column_mean(&mut (0..m));
    let reps: Vec<Vec<f64>> = (0..cfg.bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = chain_rng(cfg.seed ^ BOOT_SEED_MIX, b as u64);
            column_mean(&mut (0..m).map(|_| rng.random_range(0..m)))
        })
        .collect();
    let mut ci_low = Vec::with_capacity(g);
    let mut ci_high = Vec::with_capacity(g);
    let mut se = Vec::with_capacity(g);
    for j in 0..g {
        let mut col: Vec<f64> = reps.iter().map(|r| r[j]).collect();
        col.sort_by(f64::total_cmp);
        let mu = col.iter().sum::<f64>() / col.len() as f64;
        se.push((col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt());
        ci_low.push(quantile(&col, 0.025));
        ci_high.push(quantile(&col, 0.975));
    }
    Ok(DecayEstimate {
        n: grid,
        mean,
        ci_low,
        ci_high,
        se,
        starts: m,
        f: f.to_string(),
        osc,
        center,
        centering,
        start_source,
        sampler: s.describe(),
    })
}
