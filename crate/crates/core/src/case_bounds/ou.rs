//! Ornstein–Uhlenbeck drift estimation from discrete observations with the missing path
//! imputed segment by segment.

use super::diffusion::check_observations;
use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_sf};
use crate::wpi::{
    compose_mwg, conjugate_numeric, default_v_grid, exp_log_square_rate, BetaSpec, CompositionMode,
    ExpLogSquareRate, KStarFn, RateBound, RateOptions,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

const THETA_GRID_POINTS: usize = 40_001;
const THETA_GRID_HALF_WIDTH: f64 = 40.0;

pub const OU_RATE_SHAPE: &str = "exp(-(a/delta)*log^2((n-1)/(gamma/2)))";
pub const OU_RATE_SHAPE_DERIVED: &str = "(2/gamma)*c_tilde*exp(-(a/delta)*log^2(gamma*(n-1)/2))";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub mu0: f64,
    pub tau0: f64,
    pub times: Vec<f64>,
    pub obs: Vec<f64>,
    /// Grid points per segment used when imputing paths.
    pub m_grid: usize,
    pub gamma_dg: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OuDerived {
    pub total_time: f64,
    /// Mean of the Gaussian envelope `q` of `π(θ | Y)`.
    pub m: f64,
    pub eta: f64,
    pub eta_min: f64,
    /// `sup_θ π(θ | Y) / q(θ)`.
    pub k_const: f64,
    /// `2/(η²τ₀²)`.
    pub a_exp: f64,
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        check_observations(&self.times, &self.obs)?;
        if !(self.tau0 > 0.0) || !self.tau0.is_finite() || !self.mu0.is_finite() {
            return Err(Error::InvalidParameter(format!("need finite mu0 and tau0 > 0, got {}, {}", self.mu0, self.tau0)));
        }
        if self.m_grid < 2 {
            return Err(Error::InvalidParameter(format!("m_grid must be >= 2, got {}", self.m_grid)));
        }
        if !(self.gamma_dg > 0.0 && self.gamma_dg <= 1.0) {
            return Err(Error::InvalidParameter(format!("gamma_dg must lie in (0, 1], got {}", self.gamma_dg)));
        }
        Ok(())
    }

    /// `Δt_i - Y_{t_i}² + Y_{t_{i-1}}²` for each segment.
    pub fn segment_exponents(&self) -> Vec<f64> {
        (1..self.times.len())
            .map(|i| self.times[i] - self.times[i - 1] - self.obs[i] * self.obs[i] + self.obs[i - 1] * self.obs[i - 1])
            .collect()
    }

    /// Unnormalized `log π(θ | Y)` from the exact OU transition densities.
    pub fn log_posterior_unnormalized(&self, theta: f64) -> f64 {
        let mut acc = -0.5 * ((theta - self.mu0) / self.tau0).powi(2);
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            let mean = self.obs[i - 1] * (-theta * dt).exp();
            let var = if theta.abs() * dt < 1e-12 { dt } else { -(-2.0 * theta * dt).exp_m1() / (2.0 * theta) };
            acc -= 0.5 * (var.ln() + (self.obs[i] - mean).powi(2) / var);
        }
        if acc.is_nan() {
            f64::NEG_INFINITY
        } else {
            acc
        }
    }

    pub fn derive(&self) -> Result<OuDerived> {
        self.validate()?;
        let total_time = self.times[self.times.len() - 1] - self.times[0];
        let m = self.mu0 + 0.5 * self.tau0 * self.tau0 * total_time;
        let ex = self.segment_exponents();
        let eta = ex.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let eta_min = ex.iter().copied().fold(f64::INFINITY, f64::min);
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("need eta > 0 for a decaying envelope, got {eta}")));
        }
        let k_const = self.envelope_ratio(m);
        let a_exp = 2.0 / (eta * eta * self.tau0 * self.tau0);
        Ok(OuDerived { total_time, m, eta, eta_min, k_const, a_exp })
    }

    /// `sup_θ π(θ|Y)/q(θ)` on a dense grid, with `q = N(m, τ₀²)` and the posterior normalized by trapezoid.
    fn envelope_ratio(&self, m: f64) -> f64 {
        let lo = self.mu0.min(m) - THETA_GRID_HALF_WIDTH * self.tau0;
        let hi = self.mu0.max(m) + THETA_GRID_HALF_WIDTH * self.tau0;
        let h = (hi - lo) / (THETA_GRID_POINTS - 1) as f64;
        let thetas: Vec<f64> = (0..THETA_GRID_POINTS).map(|i| lo + h * i as f64).collect();
        let logs: Vec<f64> = thetas.iter().map(|&t| self.log_posterior_unnormalized(t)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (i, l) in logs.iter().enumerate() {
            let w = if i == 0 || i == logs.len() - 1 { 0.5 } else { 1.0 };
            z += w * (l - top).exp() * h;
        }
        let ln_z = top + z.ln();
        let ln_norm = (2.0 * PI).sqrt().ln() + self.tau0.ln();
        thetas
            .iter()
            .zip(&logs)
            .map(|(&t, &l)| l - ln_z + ln_norm + 0.5 * ((t - m) / self.tau0).powi(2))
            .fold(f64::NEG_INFINITY, f64::max)
            .exp()
    }
}

/// `β₂(s) = K·Q(θ ≥ 2 ln s/η)` plus the mirrored tail when some segment exponent is negative;
/// `1/4` for `s < 1`.
pub fn ou_beta2(s: f64, p: &OuParams, d: &OuDerived) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s must be positive, got {s}")));
    }
    if s < 1.0 {
        return Ok(0.25);
    }
    let ln_s = s.ln();
    let mut mass = normal_sf((2.0 * ln_s / d.eta - d.m) / p.tau0);
    if d.eta_min < 0.0 {
        mass += normal_cdf((2.0 * ln_s / d.eta_min - d.m) / p.tau0);
    }
    Ok((d.k_const * mass).min(0.25))
}

/// `c exp(-(a' ln s + b')²)` terms dominating [`ou_beta2`] on `s ≥ 1`.
pub fn ou_beta2_envelope(p: &OuParams, d: &OuDerived) -> BetaSpec {
    let c = 0.25f64.max(0.5 * d.k_const);
    let upper = BetaSpec::exp_log_square(c, SQRT_2 / (d.eta * p.tau0), -d.m / (SQRT_2 * p.tau0));
    if d.eta_min < 0.0 {
        let lower = BetaSpec::exp_log_square(c, SQRT_2 / (-d.eta_min * p.tau0), d.m / (SQRT_2 * p.tau0));
        BetaSpec::sum(vec![upper, lower]).with_cap(Some(0.25))
    } else {
        upper
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OuRate {
    #[serde(flatten)]
    pub derived: OuDerived,
    pub delta: f64,
    pub gamma_dg: f64,
    pub rate_shape: &'static str,
    pub rate_shape_derived: &'static str,
    /// Constant of the exp-log-square envelope when every segment exponent is nonnegative.
    pub envelope: Option<ExpLogSquareRate>,
    #[serde(skip)]
    pub kstar: KStarFn,
}

impl OuRate {
    /// The displayed shape `exp(-(a/δ) ln²((n-1)/(γ/2)))`, without its constant.
    pub fn shape(&self, n: f64) -> f64 {
        (-(self.derived.a_exp / self.delta) * ((n - 1.0) / (0.5 * self.gamma_dg)).ln().powi(2)).exp()
    }

    /// `(2/γ) C̃ exp(-(a/δ) ln²(γ(n-1)/2))` from the scaling lemma, valid once `γ(n-1)/2 ≥ n₀`.
    pub fn shape_derived(&self, n: f64) -> Option<f64> {
        let env = self.envelope.as_ref()?;
        let x = 0.5 * self.gamma_dg * (n - 1.0);
        (x >= env.n0).then(|| 2.0 / self.gamma_dg * env.envelope(x))
    }

    pub fn rate_bound(&self, options: RateOptions) -> Result<RateBound> {
        RateBound::new(self.kstar.clone(), options)
    }
}

/// Marginal-chain rate for the `θ`-coordinate: `K₂*(½γv)` with `K₂*` the numeric conjugate of
/// [`ou_beta2`].
pub fn ou_rate_summary(p: &OuParams, delta: f64) -> Result<OuRate> {
    if !(delta > 1.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must be > 1, got {delta}")));
    }
    let d = p.derive()?;
    let beta = |s: f64| ou_beta2(s, p, &d).unwrap_or(0.25);
    let k2 = conjugate_numeric(&beta, &default_v_grid())?;
    let kstar = compose_mwg(&KStarFn::linear(p.gamma_dg)?, &KStarFn::identity(), &k2, CompositionMode::Marginal2mg)?;
    let envelope = if d.eta_min >= 0.0 {
        let c = 0.25f64.max(0.5 * d.k_const);
        Some(exp_log_square_rate(c, SQRT_2 / (d.eta * p.tau0), -d.m / (SQRT_2 * p.tau0), delta)?)
    } else {
        None
    };
    Ok(OuRate {
        derived: d,
        delta,
        gamma_dg: p.gamma_dg,
        rate_shape: OU_RATE_SHAPE,
        rate_shape_derived: OU_RATE_SHAPE_DERIVED,
        envelope,
        kstar,
    })
}

/// `F⁻¹(n - 1)` for the marginal composition, `n ≥ 2`.
pub fn ou_rate(n: u64, p: &OuParams, delta: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be >= 2, got {n}")));
    }
    let r = ou_rate_summary(p, delta)?;
    Ok(r.rate_bound(RateOptions::default())?.bound(n as f64).value)
}

/// Observations of an OU process at integer times, simulated exactly.
pub fn synthetic_ou(theta: f64, n_obs: usize, dt: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sd = (-(-2.0 * theta * dt).exp_m1() / (2.0 * theta)).sqrt();
    let mut y = vec![rng.sample::<f64, _>(StandardNormal) / (2.0 * theta).sqrt()];
    for i in 1..n_obs {
        let prev = y[i - 1];
        y.push(prev * (-theta * dt).exp() + sd * rng.sample::<f64, _>(StandardNormal));
    }
    ((0..n_obs).map(|i| i as f64 * dt).collect(), y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{integrate, log_grid};
    use proptest::prelude::*;

    fn params(seed: u64) -> OuParams {
        let (times, obs) = synthetic_ou(1.0, 6, 1.0, seed);
        OuParams { mu0: 0.5, tau0: 0.7, times, obs, m_grid: 16, gamma_dg: 0.3 }
    }

    fn fixture_with_positive_eta() -> OuParams {
        (0..100).map(params).find(|p| p.derive().is_ok()).unwrap()
    }

    #[test]
    fn derived_quantities() {
        let p = fixture_with_positive_eta();
        let d = p.derive().unwrap();
        assert!((d.m - (0.5 + 0.5 * 0.49 * 5.0)).abs() < 1e-12);
        let ex = p.segment_exponents();
        assert_eq!(ex.len(), 5);
        assert!((d.eta - ex.iter().cloned().fold(f64::MIN, f64::max)).abs() < 1e-15);
        assert!((d.a_exp - 2.0 / (d.eta * d.eta * 0.49)).abs() < 1e-12);
        assert!(d.k_const >= 1.0 - 1e-6);
    }

    #[test]
    fn k_const_dominates_posterior() {
        // oracle: posterior normalized by adaptive quadrature, compared pointwise with K q
        let p = fixture_with_positive_eta();
        let d = p.derive().unwrap();
        let z = integrate(&|t| p.log_posterior_unnormalized(t).exp(), -30.0, 30.0, 1e-12);
        for t in (-60..=60).map(|i| i as f64 * 0.1) {
            let post = p.log_posterior_unnormalized(t).exp() / z;
            let q = (-(0.5) * ((t - d.m) / p.tau0).powi(2)).exp() / ((2.0 * PI).sqrt() * p.tau0);
            assert!(post <= d.k_const * q * (1.0 + 1e-4), "θ={t}");
        }
    }

    #[test]
    fn beta_is_posterior_tail_bound() {
        // the exact posterior tail mass is below the envelope value
        let p = fixture_with_positive_eta();
        let d = p.derive().unwrap();
        let z = integrate(&|t| p.log_posterior_unnormalized(t).exp(), -30.0, 30.0, 1e-12);
        for s in [1.5, 4.0, 30.0] {
            let cut = 2.0 * f64::ln(s) / d.eta;
            let mut tail = integrate(&|t| p.log_posterior_unnormalized(t).exp(), cut, 30.0, 1e-12) / z;
            if d.eta_min < 0.0 {
                tail += integrate(&|t| p.log_posterior_unnormalized(t).exp(), -30.0, 2.0 * f64::ln(s) / d.eta_min, 1e-12) / z;
            }
            assert!(tail.min(0.25) <= ou_beta2(s, &p, &d).unwrap() * (1.0 + 1e-6));
        }
        assert_eq!(ou_beta2(0.5, &p, &d).unwrap(), 0.25);
    }

    #[test]
    fn envelope_dominates_beta() {
        for seed in 0..20 {
            let p = params(seed);
            let Ok(d) = p.derive() else { continue };
            let env = ou_beta2_envelope(&p, &d);
            for s in log_grid(1.0, 1e12, 200) {
                assert!(ou_beta2(s, &p, &d).unwrap() <= env.value(s) * (1.0 + 1e-12) + 1e-300, "seed={seed} s={s}");
            }
        }
    }

    #[test]
    fn displayed_envelope_holds_for_nonpositive_m() {
        let mut p = fixture_with_positive_eta();
        p.mu0 = -5.0;
        let d = p.derive().unwrap();
        assert!(d.m <= 0.0);
        let c = 0.25f64.max(0.5 * d.k_const);
        for s in log_grid(1.0, 1e8, 200) {
            let shown = c * (-(2.0 / (d.eta * d.eta * p.tau0 * p.tau0)) * s.ln().powi(2)).exp();
            if d.eta_min >= 0.0 {
                assert!(ou_beta2(s, &p, &d).unwrap() <= shown * (1.0 + 1e-12) + 1e-300);
            }
        }
    }

    #[test]
    fn rate_summary_and_shapes() {
        let p = fixture_with_positive_eta();
        assert!(matches!(ou_rate_summary(&p, 1.0), Err(Error::InvalidParameter(_))));
        let r = ou_rate_summary(&p, 1.5).unwrap();
        assert_eq!(r.kstar.n_offset, 1);
        // n = 2 evaluates the displayed shape at 1/(γ/2)
        let expected = (-(r.derived.a_exp / 1.5) * (1.0 / 0.15f64).ln().powi(2)).exp();
        assert!((r.shape(2.0) - expected).abs() < 1e-15);
        let rb = r.rate_bound(RateOptions::default()).unwrap();
        let mut prev = 0.25;
        for n in [2.0, 10.0, 100.0, 1e4] {
            let b = rb.bound(n).value;
            assert!(b <= prev);
            prev = b;
        }
        assert!(ou_rate(1, &p, 1.5).is_err());
        assert!((ou_rate(100, &p, 1.5).unwrap() - rb.bound(100.0).value).abs() < 1e-15);
    }

    #[test]
    fn derived_shape_dominates_numeric_bound() {
        let p = fixture_with_positive_eta();
        let r = ou_rate_summary(&p, 1.5).unwrap();
        let Some(env) = &r.envelope else { return };
        let rb = r.rate_bound(RateOptions { quadrature_nodes: 512, x_min: 1e-30 }).unwrap();
        for n in log_grid(2.0 + 2.0 * env.n0 / r.gamma_dg, 1e6, 10) {
            let b = rb.bound(n);
            if let Some(shape) = r.shape_derived(n) {
                assert!(b.value <= shape * (1.0 + 1e-9), "n={n}: {} vs {shape}", b.value);
            }
        }
    }

    #[test]
    fn validation() {
        let mut p = fixture_with_positive_eta();
        p.m_grid = 1;
        assert!(p.validate().is_err());
        let mut p = fixture_with_positive_eta();
        p.times[2] = p.times[1];
        assert!(p.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn beta_monotone_and_capped(seed in 0u64..200) {
            let p = params(seed);
            if let Ok(d) = p.derive() {
                let mut prev = f64::INFINITY;
                for s in log_grid(1e-3, 1e9, 200) {
                    let b = ou_beta2(s, &p, &d).unwrap();
                    prop_assert!((0.0..=0.25).contains(&b));
                    prop_assert!(b <= prev + 1e-15);
                    prev = b;
                }
            }
        }
    }
}
