//! Normal/inverse-gamma target: `ξ | τ ~ N(0, 1/(2τ))`, `τ | ξ ~ Γ(1, β + ξ²/2)`,
//! both updated by random-walk Metropolis.

use crate::error::{Error, Result};
use crate::special::{lambert_w, regularized_gamma, Branch, GammaKind, INV_E};
use crate::wpi::{compose_mwg, conjugate, BetaSpec, CompositionMode, KStarFn};
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// Spectral gap constant of RWM on a log-concave one-dimensional conditional.
pub const NIG_C: f64 = 1.0 / (PI * PI * 2048.0);
/// Spectral gap constant for the `τ`-update.
pub const NIG_C0: f64 = 1.972e-4;

/// RWM proposal scale: a fixed value, or the conditional-adaptive choice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSize {
    Fixed(f64),
    Keyword(ScaledKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaledKeyword {
    Scaled,
}

impl StepSize {
    pub const SCALED: StepSize = StepSize::Keyword(ScaledKeyword::Scaled);

    pub fn fixed(&self) -> Option<f64> {
        match self {
            StepSize::Fixed(s) => Some(*s),
            StepSize::Keyword(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub beta_hyper: f64,
    pub sigma_xi: StepSize,
    pub sigma_tau: StepSize,
    pub gamma_dg: f64,
}

impl NigParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_hyper > 0.0) || !self.beta_hyper.is_finite() {
            return Err(Error::InvalidParameter(format!("beta_hyper must be positive, got {}", self.beta_hyper)));
        }
        if !(self.gamma_dg > 0.0 && self.gamma_dg <= 1.0) {
            return Err(Error::InvalidParameter(format!("gamma_dg must lie in (0, 1], got {}", self.gamma_dg)));
        }
        for (name, s) in [("sigma_xi", self.sigma_xi), ("sigma_tau", self.sigma_tau)] {
            if let Some(v) = s.fixed() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Proposal scale of the `ξ`-update at the current `ξ`.
    pub fn xi_step(&self, xi: f64) -> f64 {
        match self.sigma_xi {
            StepSize::Fixed(s) => s,
            StepSize::Keyword(_) => 3f64.sqrt() / (self.beta_hyper + 0.5 * xi * xi),
        }
    }

    /// Proposal scale of the `τ`-update at the current `τ`.
    pub fn tau_step(&self, tau: f64) -> f64 {
        match self.sigma_tau {
            StepSize::Fixed(s) => s,
            StepSize::Keyword(_) => (0.5 / tau).sqrt(),
        }
    }

    fn fixed_steps(&self) -> Result<(f64, f64)> {
        match (self.sigma_xi.fixed(), self.sigma_tau.fixed()) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::InvalidParameter("fixed-step bounds need numeric sigma_xi and sigma_tau".into())),
        }
    }
}

/// Lower bounds on the spectral gaps of the two conditional RWM kernels.
pub fn nig_conditional_gaps(beta: f64, xi: f64, tau: f64, sigma_xi: f64, sigma_tau: f64) -> Result<(f64, f64)> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    if !(sigma_xi > 0.0) || !(sigma_tau > 0.0) || !(beta > 0.0) {
        return Err(Error::Domain("beta and step sizes must be positive".into()));
    }
    let beta_xi = beta + 0.5 * xi * xi;
    let bs = beta_xi * sigma_xi;
    let gamma_xi = NIG_C * bs.powi(6) / (bs * bs + 1.0).powi(4);
    let s2 = sigma_tau * sigma_tau;
    let gamma_tau = NIG_C0 * s2 * tau * (-2.0 * s2 * tau).exp();
    Ok((gamma_xi, gamma_tau))
}

/// Rate summary for conditional-adaptive step sizes.
#[derive(Clone, Debug, Serialize)]
pub struct NigScaledRate {
    pub gamma_xi: f64,
    pub gamma_tau: f64,
    pub gamma_dg: f64,
    /// `F⁻¹(n) = ¼ exp(-kappa n)`.
    pub kappa: f64,
    #[serde(skip)]
    pub kstar: KStarFn,
}

pub fn nig_scaled_rate(p: &NigParams) -> Result<NigScaledRate> {
    p.validate()?;
    if p.sigma_xi != StepSize::SCALED || p.sigma_tau != StepSize::SCALED {
        return Err(Error::InvalidParameter("scaled rate needs sigma_xi = sigma_tau = \"scaled\"".into()));
    }
    // any (ξ, τ) gives the same value under the adaptive scales
    let (gamma_xi, gamma_tau) = nig_conditional_gaps(p.beta_hyper, 0.0, 1.0, p.xi_step(0.0), p.tau_step(1.0))?;
    let kstar = compose_mwg(
        &KStarFn::linear(p.gamma_dg)?,
        &KStarFn::linear(gamma_xi)?,
        &KStarFn::linear(gamma_tau)?,
        CompositionMode::StrongSpi,
    )?;
    Ok(NigScaledRate { gamma_xi, gamma_tau, gamma_dg: p.gamma_dg, kappa: gamma_xi * gamma_tau * p.gamma_dg, kstar })
}

/// `c' = c (β²σ²/(β²σ²+1))⁴`, so that `γ_ξ(ξ) ≥ c'/(β_ξ σ)²`.
fn c_prime(beta: f64, sigma_xi: f64) -> f64 {
    let b2 = (beta * sigma_xi).powi(2);
    NIG_C * (b2 / (b2 + 1.0)).powi(4)
}

/// `s` below which the `τ`-gap level set is empty and `β₂ = 1/4`.
pub fn nig_tau_threshold() -> f64 {
    2.0 * E / NIG_C0
}

/// `β₁(s) = Π(1/γ_ξ(ξ) > s)` and `β₂(s) = Π(1/γ_τ(τ) > s)` for fixed step sizes, both capped at 1/4.
pub fn nig_fixed_betas(s: f64, p: &NigParams) -> Result<(f64, f64)> {
    p.validate()?;
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s must be positive, got {s}")));
    }
    let (sx, st) = p.fixed_steps()?;
    let beta = p.beta_hyper;
    let q = (c_prime(beta, sx) * s).sqrt() / sx;
    let beta1 = if q <= beta {
        1.0
    } else {
        // two-sided tail of the marginal of ξ, a Cauchy law with scale √(2β)
        let z = ((q - beta) / beta).sqrt();
        (2.0 / PI) * (0.5 * PI - z.atan())
    };
    let beta2 = if s < nig_tau_threshold() {
        1.0
    } else {
        let y = 2.0 / (NIG_C0 * s);
        if y > INV_E {
            return Err(Error::ValidityRange(format!("Lambert-W argument {} is below -1/e", -y)));
        }
        let z_lo = -lambert_w(Branch::Principal, -y)?;
        let z_hi = -lambert_w(Branch::MinusOne, -y)?;
        let k = beta / (2.0 * st * st);
        regularized_gamma(GammaKind::Lower, 0.5, k * z_lo)? + regularized_gamma(GammaKind::Upper, 0.5, k * z_hi)?
    };
    Ok((beta1.min(0.25), beta2.min(0.25)))
}

/// Power-law envelopes of the fixed-step β's and the rate they imply.
#[derive(Clone, Debug, Serialize)]
pub struct NigFixedRate {
    pub sigma_xi: f64,
    pub sigma_tau: f64,
    /// `min(1/2, β/(2σ_τ²))`.
    pub m: f64,
    /// `β₁(s) ≤ c1_env s^{-1/4}`.
    pub c1_env: f64,
    /// `β₂(s) ≤ c2_env s^{-m}`.
    pub c2_env: f64,
    /// `K*(v) = c_prime v^{kstar_exponent}`.
    pub c_prime: f64,
    pub kstar_exponent: f64,
    /// `F⁻¹(n) ≤ c_tilde n^{-rate_exponent}`.
    pub c_tilde: f64,
    pub rate_exponent: f64,
    /// The displayed exponent, `1/14` when `β/σ > 1` and `β/(4β + 10σ)` otherwise.
    pub rate_exponent_displayed: f64,
    pub gamma_dg: f64,
    #[serde(skip)]
    pub kstar: KStarFn,
}

pub fn nig_fixed_rate(p: &NigParams) -> Result<NigFixedRate> {
    p.validate()?;
    let (sx, st) = p.fixed_steps()?;
    let beta = p.beta_hyper;
    let cp = c_prime(beta, sx);
    let c1_env = (2.0 / PI) * (2.0 * beta * sx).sqrt() * cp.powf(-0.25);

    let k = beta / (2.0 * st * st);
    let m = k.min(0.5);
    let s0 = nig_tau_threshold();
    let lower = (2.0 / PI.sqrt()) * (beta * E / (st * st * NIG_C0)).sqrt();
    let upper = (1.0 / (PI * k).sqrt()) * (2.0 / NIG_C0).powf(k);
    let c2_env = lower * s0.powf(m - 0.5) + upper * s0.powf(m - k);

    let k1 = conjugate(&BetaSpec::power_law(c1_env, 0.25), &crate::wpi::default_v_grid())?;
    let k2 = conjugate(&BetaSpec::power_law(c2_env, m), &crate::wpi::default_v_grid())?;
    let kstar = compose_mwg(&KStarFn::linear(p.gamma_dg)?, &k1, &k2, CompositionMode::StrongSpi)?;
    let (c_prime_k, exponent) = match kstar.repr {
        crate::wpi::KStarRepr::Power { coefficient, exponent } => (coefficient, exponent),
        _ => return Err(Error::Model("power-law envelopes should compose to a power".into())),
    };
    let rate_exponent = 1.0 / (exponent - 1.0);
    let c_tilde = ((exponent - 1.0) * c_prime_k).powf(-rate_exponent);
    let sigma0 = st;
    let rate_exponent_displayed = if beta / sigma0 > 1.0 { 1.0 / 14.0 } else { beta / (4.0 * beta + 10.0 * sigma0) };
    Ok(NigFixedRate {
        sigma_xi: sx,
        sigma_tau: st,
        m,
        c1_env,
        c2_env,
        c_prime: c_prime_k,
        kstar_exponent: exponent,
        c_tilde,
        rate_exponent,
        rate_exponent_displayed,
        gamma_dg: p.gamma_dg,
        kstar,
    })
}
