use super::{ChainRng, Sampler};
use crate::case_bounds::OuParams;
use crate::error::Result;
use rand::Rng;
use rand_distr::StandardNormal;

pub const DEFAULT_OU_BURN_IN: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OuState {
    pub theta: f64,
    /// One path per segment, `m_grid + 1` points each, endpoints pinned to the observations.
    pub paths: Vec<Vec<f64>>,
    pub accepted: Vec<u64>,
    pub sweeps: u64,
}

/// Brownian bridge from `a` to `b` over `duration`, on `m` equal steps.
pub fn brownian_bridge(a: f64, b: f64, duration: f64, m: usize, rng: &mut ChainRng) -> Vec<f64> {
    let h = duration / m as f64;
    let mut path = Vec::with_capacity(m + 1);
    path.push(a);
    let mut x = a;
    for k in 0..m - 1 {
        let remaining = duration - k as f64 * h;
        let mean = x + (b - x) * h / remaining;
        let var = h * (remaining - h) / remaining;
        x = mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        path.push(x);
    }
    path.push(b);
    path
}

/// Left-point Itô sum `Σ X_k (X_{k+1} - X_k)`.
pub fn ito_sum(path: &[f64]) -> f64 {
    path.windows(2).map(|w| w[0] * (w[1] - w[0])).sum()
}

/// Trapezoid approximation of `∫ X² dt` on steps of size `h`.
pub fn trapezoid_sq(path: &[f64], h: f64) -> f64 {
    path.windows(2).map(|w| 0.5 * (w[0] * w[0] + w[1] * w[1])).sum::<f64>() * h
}

/// `log α = -(θ²/2)(∫X'² - ∫X²)` for a bridge proposal `new` replacing `old`.
pub fn ou_log_acceptance(new: &[f64], old: &[f64], h: f64, theta: f64) -> f64 {
    -0.5 * theta * theta * (trapezoid_sq(new, h) - trapezoid_sq(old, h))
}

/// Data augmentation for OU drift: `θ` from its Gaussian conditional given the imputed path,
/// then each segment by an independence sampler with Brownian-bridge proposals.
#[derive(Clone, Debug)]
pub struct OuSampler {
    pub params: OuParams,
    pub burn_in: usize,
    steps: Vec<f64>,
}

impl OuSampler {
    pub fn new(params: OuParams, burn_in: usize) -> Result<Self> {
        params.validate()?;
        let m = params.m_grid as f64;
        let steps = params.times.windows(2).map(|w| (w[1] - w[0]) / m).collect();
        Ok(OuSampler { params, burn_in, steps })
    }

    pub fn segments(&self) -> usize {
        self.steps.len()
    }

    /// Mean and variance of `θ | X` from the discretized `∫X dX` and `∫X² dt`.
    pub fn theta_conditional(&self, paths: &[Vec<f64>]) -> (f64, f64) {
        let (mut ito, mut quad) = (0.0, 0.0);
        for (p, h) in paths.iter().zip(&self.steps) {
            ito += ito_sum(p);
            quad += trapezoid_sq(p, *h);
        }
        let prior_prec = 1.0 / (self.params.tau0 * self.params.tau0);
        let prec = quad + prior_prec;
        ((-ito + self.params.mu0 * prior_prec) / prec, 1.0 / prec)
    }

    /// One independence-sampler sweep over all segments at the current `θ`.
    pub fn update_paths(&self, s: &mut OuState, rng: &mut ChainRng) {
        let (times, obs, m) = (&self.params.times, &self.params.obs, self.params.m_grid);
        for i in 0..self.steps.len() {
            let prop = brownian_bridge(obs[i], obs[i + 1], times[i + 1] - times[i], m, rng);
            let log_alpha = ou_log_acceptance(&prop, &s.paths[i], self.steps[i], s.theta);
            if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
                s.paths[i] = prop;
                s.accepted[i] += 1;
            }
        }
    }

    pub fn acceptance_rates(&self, s: &OuState) -> Vec<f64> {
        s.accepted.iter().map(|&a| a as f64 / s.sweeps.max(1) as f64).collect()
    }
}

impl Sampler for OuSampler {
    type State = OuState;

    fn coord_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn initial(&self, rng: &mut ChainRng) -> OuState {
        let (times, obs, m) = (&self.params.times, &self.params.obs, self.params.m_grid);
        let paths = (0..self.steps.len())
            .map(|i| brownian_bridge(obs[i], obs[i + 1], times[i + 1] - times[i], m, rng))
            .collect();
        OuState { theta: self.params.mu0, paths, accepted: vec![0; self.steps.len()], sweeps: 0 }
    }

    fn stationary(&self, rng: &mut ChainRng) -> OuState {
        let mut s = self.initial(rng);
        for _ in 0..self.burn_in {
            self.step(&mut s, rng);
        }
        s.accepted.iter_mut().for_each(|a| *a = 0);
        s.sweeps = 0;
        s
    }

    fn burn_in(&self) -> usize {
        self.burn_in
    }

    fn step(&self, s: &mut OuState, rng: &mut ChainRng) {
        s.sweeps += 1;
        let (mean, var) = self.theta_conditional(&s.paths);
        s.theta = mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        self.update_paths(s, rng);
    }

    fn coord(&self, s: &OuState, _i: usize) -> f64 {
        s.theta
    }

    fn diagnostics(&self, s: &OuState) -> Vec<(String, f64)> {
        self.acceptance_rates(s)
            .into_iter()
            .enumerate()
            .map(|(i, a)| (format!("acceptance_segment_{}", i + 1), a))
            .collect()
    }

    fn describe(&self) -> String {
        format!("ou(segments={}, m_grid={}, burn_in={})", self.steps.len(), self.params.m_grid, self.burn_in)
    }
}
