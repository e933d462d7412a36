//! Bayesian linear regression with a Gamma prior on the noise precision:
//! `λ | β` is drawn exactly and `β | λ` by random-walk Metropolis.

use crate::error::{Error, Result};
use crate::special::{lambert_w, regularized_gamma, Branch, GammaKind, INV_E};
use crate::wpi::{
    compose_mwg, conjugate_numeric_rescaled, default_v_grid, CompositionMode, KStarFn, RateBound, RateOptions,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

/// RWM spectral gap constant for strongly log-concave, smooth targets.
pub const BAYES_C: f64 = 1.972e-4;
/// Multiplier in `Γ_U(t, x) ≤ B e^{-x} x^{t-1}` for `x ≥ B(t-1)/(B-1)`.
pub const GAMMA_UPPER_B: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesParams {
    pub a: f64,
    pub b: f64,
    /// Design matrix, one row per observation.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub sigma0: f64,
    pub gamma_dg: f64,
}

/// Quantities derived from the data that the β and the sampler both need.
#[derive(Clone, Debug, Serialize)]
pub struct BayesDerived {
    pub n_obs: usize,
    pub dim: usize,
    pub a_prime: f64,
    pub b_prime: f64,
    /// `λ_min(XᵀX)`.
    pub m_prime: f64,
    /// `λ_max(XᵀX)`.
    pub l_prime: f64,
    pub c1: f64,
    pub c2: f64,
    /// Least-squares fit `(XᵀX)⁻¹XᵀY`.
    pub u: Vec<f64>,
    #[serde(skip)]
    pub xtx: DMatrix<f64>,
}

impl BayesParams {
    pub fn design(&self) -> Result<DMatrix<f64>> {
        let n = self.x.len();
        let p = self.x.first().map_or(0, Vec::len);
        if n == 0 || p == 0 {
            return Err(Error::InvalidParameter("design matrix must be non-empty".into()));
        }
        if let Some(row) = self.x.iter().find(|r| r.len() != p) {
            return Err(Error::Dimension { expected: p, got: row.len() });
        }
        Ok(DMatrix::from_fn(n, p, |i, j| self.x[i][j]))
    }

    pub fn derive(&self) -> Result<BayesDerived> {
        if !(self.a > 1.0) || !(self.b > 0.0) {
            return Err(Error::InvalidParameter(format!("need a > 1 and b > 0, got a = {}, b = {}", self.a, self.b)));
        }
        if !(self.sigma0 > 0.0) || !self.sigma0.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        if !(self.gamma_dg > 0.0 && self.gamma_dg <= 1.0) {
            return Err(Error::InvalidParameter(format!("gamma_dg must lie in (0, 1], got {}", self.gamma_dg)));
        }
        let x = self.design()?;
        let (n, p) = x.shape();
        if self.y.len() != n {
            return Err(Error::Dimension { expected: n, got: self.y.len() });
        }
        if n <= p {
            return Err(Error::InvalidParameter(format!("need more observations than covariates, got N = {n}, p = {p}")));
        }
        let y = DVector::from_column_slice(&self.y);
        let xtx = x.transpose() * &x;
        let eig = xtx.clone().symmetric_eigen();
        let m_prime = eig.eigenvalues.min();
        let l_prime = eig.eigenvalues.max();
        if !(m_prime > 1e-12 * l_prime.max(1.0)) {
            return Err(Error::InvalidParameter("design matrix does not have full column rank".into()));
        }
        let chol = xtx
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("XᵀX is not positive definite".into()))?;
        let u = chol.solve(&(x.transpose() * &y));
        let residual = y.dot(&y) - u.dot(&(&xtx * &u));
        let a_prime = self.a + 0.5 * n as f64 - 0.5 * p as f64;
        let b_prime = self.b + 0.5 * residual.max(0.0);
        let c1 = 1.0 / (BAYES_C * m_prime * self.sigma0 * self.sigma0);
        let c2 = 2.0 * l_prime * p as f64 * self.sigma0 * self.sigma0;
        Ok(BayesDerived { n_obs: n, dim: p, a_prime, b_prime, m_prime, l_prime, c1, c2, u: u.iter().copied().collect(), xtx })
    }
}

impl BayesDerived {
    /// `s` below which `β(s) = 1/4`.
    pub fn threshold(&self) -> f64 {
        E * self.c1 * self.c2
    }

    pub fn exponent(&self) -> f64 {
        self.a_prime.min(self.b_prime / self.c2)
    }

    /// Value of `σ₀²` at which `a' = b'/C₂`.
    pub fn crossover_sigma0_sq(&self) -> f64 {
        self.b_prime / (2.0 * self.a_prime * self.l_prime * self.dim as f64)
    }

    /// `RWM` gap lower bound of the `β | λ` update.
    pub fn conditional_gap(&self, lambda: f64, sigma0: f64) -> f64 {
        let s2 = sigma0 * sigma0;
        BAYES_C * lambda * self.m_prime * s2 * (-2.0 * lambda * self.l_prime * self.dim as f64 * s2).exp()
    }
}

/// `β(s) = Π(γ_λ ≤ 1/s)` with `λ ~ Γ(a', b')`, capped at 1/4.
pub fn bayes_beta2(s: f64, d: &BayesDerived) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s must be positive, got {s}")));
    }
    if s < d.threshold() {
        return Ok(0.25);
    }
    let y = d.c1 * d.c2 / s;
    if y > INV_E {
        return Err(Error::ValidityRange(format!("Lambert-W argument {} is below -1/e", -y)));
    }
    let k = d.b_prime / d.c2;
    let x_lo = -k * lambert_w(Branch::Principal, -y)?;
    let x_hi = -k * lambert_w(Branch::MinusOne, -y)?;
    let v = regularized_gamma(GammaKind::Lower, d.a_prime, x_lo)? + regularized_gamma(GammaKind::Upper, d.a_prime, x_hi)?;
    Ok(v.min(0.25))
}

/// Explicit upper bound on [`bayes_beta2`] built from `-W₀(-y) ≤ e y`, `-W₋₁(-y) ≥ ln(1/y)`,
/// `γ(a, x) ≤ xᵃ/a` and the `Γ_U` bound with `B = 2`.
pub fn bayes_beta2_envelope(s: f64, d: &BayesDerived) -> f64 {
    if s < d.threshold() {
        return 0.25;
    }
    let a = d.a_prime;
    let k = d.b_prime / d.c2;
    let ln_gamma_a = libm::lgamma(a);
    let lower = (a * (E * d.b_prime * d.c1 / s).ln() - a.ln() - ln_gamma_a).exp();
    let x_lo = k * (s / (d.c1 * d.c2)).ln();
    let upper = if a <= 1.0 {
        ((a - 1.0) * x_lo.ln() - x_lo - ln_gamma_a).exp()
    } else if x_lo >= GAMMA_UPPER_B * (a - 1.0) / (GAMMA_UPPER_B - 1.0) {
        GAMMA_UPPER_B * ((a - 1.0) * x_lo.ln() - x_lo - ln_gamma_a).exp()
    } else {
        1.0
    };
    (lower + upper).min(0.25)
}

#[derive(Clone, Debug, Serialize)]
pub struct BayesRate {
    #[serde(flatten)]
    pub derived: BayesDerived,
    pub exponent: f64,
    pub crossover_sigma0_sq: f64,
    /// Which term sets the tail: `"a_prime"` or `"b_prime_over_c2"`.
    pub dominant: &'static str,
    pub threshold: f64,
    pub gamma_upper_b: f64,
    pub gamma_dg: f64,
    #[serde(skip)]
    pub kstar: KStarFn,
}

/// Marginal-chain rate for the `β`-coordinate: `K₂*(½γv)` with `K₂*` conjugated numerically.
pub fn bayes_rate(p: &BayesParams) -> Result<BayesRate> {
    let d = p.derive()?;
    let beta = |s: f64| bayes_beta2(s, &d).unwrap_or(0.25);
    let k2 = conjugate_numeric_rescaled(&beta, &default_v_grid(), d.threshold())?;
    let kstar = compose_mwg(&KStarFn::linear(p.gamma_dg)?, &KStarFn::identity(), &k2, CompositionMode::Marginal2mg)?;
    let exponent = d.exponent();
    let dominant = if d.a_prime <= d.b_prime / d.c2 { "a_prime" } else { "b_prime_over_c2" };
    Ok(BayesRate {
        exponent,
        crossover_sigma0_sq: d.crossover_sigma0_sq(),
        dominant,
        threshold: d.threshold(),
        gamma_upper_b: GAMMA_UPPER_B,
        gamma_dg: p.gamma_dg,
        derived: d,
        kstar,
    })
}

impl BayesRate {
    pub fn rate_bound(&self, options: RateOptions) -> Result<RateBound> {
        RateBound::new(self.kstar.clone(), options)
    }
}

/// Small deterministic regression problem used by tests, benches and the CLI defaults.
pub fn synthetic_regression(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..p).map(|j| 1.0 - 0.5 * j as f64).collect();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mean: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
        y.push(mean + rng.sample::<f64, _>(StandardNormal));
        x.push(row);
    }
    (x, y)
}
