use super::{metropolis_accept, ChainRng, Sampler, TestFn};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NigMode {
    ExactGibbs,
    /// `σ² = 3/β_ξ²` for the `τ`-update and `σ² = 1/(2τ)` for the `ξ`-update.
    MwgScaled,
    MwgFixed { sigma0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NigState {
    pub tau: f64,
    pub xi: f64,
    pub accepted_tau: u64,
    pub accepted_xi: u64,
    pub sweeps: u64,
}

/// Target `τ ~ Γ(1/2, β)`, `ξ | τ ~ N(0, 1/τ)`, scanned as `τ | ξ` then `ξ | τ`.
#[derive(Clone, Debug)]
pub struct NigSampler {
    pub beta: f64,
    pub mode: NigMode,
    tau_marginal: Gamma<f64>,
}

impl NigSampler {
    pub fn new(beta: f64, mode: NigMode) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        if let NigMode::MwgFixed { sigma0 } = mode {
            if !(sigma0 > 0.0) || !sigma0.is_finite() {
                return Err(Error::InvalidParameter(format!("sigma0 must be positive, got {sigma0}")));
            }
        }
        let tau_marginal = Gamma::new(0.5, 1.0 / beta).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(NigSampler { beta, mode, tau_marginal })
    }

    fn steps(&self, tau: f64, xi: f64) -> (f64, f64) {
        match self.mode {
            NigMode::MwgScaled => (3f64.sqrt() / (self.beta + 0.5 * xi * xi), (0.5 / tau).sqrt()),
            NigMode::MwgFixed { sigma0 } => (sigma0, sigma0),
            NigMode::ExactGibbs => (f64::NAN, f64::NAN),
        }
    }

    /// `log π(τ'|ξ) - log π(τ|ξ)` for the `Γ(1, β + ξ²/2)` conditional.
    pub fn tau_log_ratio(&self, xi: f64, tau: f64, proposal: f64) -> f64 {
        if proposal <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -(self.beta + 0.5 * xi * xi) * (proposal - tau)
    }

    /// `log π(ξ'|τ) - log π(ξ|τ)` for the `N(0, 1/τ)` conditional.
    pub fn xi_log_ratio(&self, tau: f64, xi: f64, proposal: f64) -> f64 {
        -0.5 * tau * (proposal * proposal - xi * xi)
    }
}

impl Sampler for NigSampler {
    type State = NigState;

    fn coord_names(&self) -> Vec<String> {
        vec!["tau".into(), "xi".into()]
    }

    fn initial(&self, _rng: &mut ChainRng) -> NigState {
        NigState { tau: 0.5 / self.beta, xi: 0.0, accepted_tau: 0, accepted_xi: 0, sweeps: 0 }
    }

    fn stationary(&self, rng: &mut ChainRng) -> NigState {
        let tau: f64 = self.tau_marginal.sample(rng);
        let tau = tau.max(f64::MIN_POSITIVE);
        let z: f64 = rng.sample(StandardNormal);
        NigState { tau, xi: z / tau.sqrt(), accepted_tau: 0, accepted_xi: 0, sweeps: 0 }
    }

    fn exact_stationary(&self) -> bool {
        true
    }

    fn step(&self, s: &mut NigState, rng: &mut ChainRng) {
        s.sweeps += 1;
        match self.mode {
            NigMode::ExactGibbs => {
                let rate = self.beta + 0.5 * s.xi * s.xi;
                let e: f64 = rand_distr::Exp1.sample(rng);
                s.tau = (e / rate).max(f64::MIN_POSITIVE);
                let z: f64 = rng.sample(StandardNormal);
                s.xi = z / s.tau.sqrt();
                s.accepted_tau += 1;
                s.accepted_xi += 1;
            }
            NigMode::MwgScaled | NigMode::MwgFixed { .. } => {
                let (step_tau, _) = self.steps(s.tau, s.xi);
                let z: f64 = rng.sample(StandardNormal);
                let prop = s.tau + step_tau * z;
                if metropolis_accept(self.tau_log_ratio(s.xi, s.tau, prop), rng) {
                    s.tau = prop;
                    s.accepted_tau += 1;
                }
                let (_, step_xi) = self.steps(s.tau, s.xi);
                let z: f64 = rng.sample(StandardNormal);
                let prop = s.xi + step_xi * z;
                if metropolis_accept(self.xi_log_ratio(s.tau, s.xi, prop), rng) {
                    s.xi = prop;
                    s.accepted_xi += 1;
                }
            }
        }
    }

    fn coord(&self, s: &NigState, i: usize) -> f64 {
        if i == 0 {
            s.tau
        } else {
            s.xi
        }
    }

    fn analytic_mean(&self, f: &TestFn) -> Option<f64> {
        // ξ is symmetric about 0 and independent of sign given τ
        match f {
            TestFn::Tanh { coord: 1, shift, .. } if *shift == 0.0 => Some(0.0),
            _ => None,
        }
    }

    fn diagnostics(&self, s: &NigState) -> Vec<(String, f64)> {
        let n = s.sweeps.max(1) as f64;
        vec![
            ("acceptance_tau".into(), s.accepted_tau as f64 / n),
            ("acceptance_xi".into(), s.accepted_xi as f64 / n),
        ]
    }

    fn describe(&self) -> String {
        let mode = match self.mode {
            NigMode::ExactGibbs => "exact_gibbs".to_string(),
            NigMode::MwgScaled => "mwg_scaled".to_string(),
            NigMode::MwgFixed { sigma0 } => format!("mwg_fixed(sigma0={sigma0})"),
        };
        format!("nig(beta={}, {mode})", self.beta)
    }
}
