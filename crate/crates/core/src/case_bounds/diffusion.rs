//! Drift interface for unit-diffusion SDEs `dX = b(X, θ) dt + dW` and the per-segment
//! bounds on the Girsanov weight of a Brownian-bridge independence sampler.

use crate::error::{Error, Result};
use crate::wpi::BetaSpec;

pub trait Drift: Send + Sync {
    fn b(&self, x: f64, theta: f64) -> f64;
    /// `∂b/∂x`.
    fn db(&self, x: f64, theta: f64) -> f64;
    /// `A(u) = ∫₀ᵘ b(x, θ) dx`.
    fn antiderivative(&self, u: f64, theta: f64) -> f64;
    /// `M(θ) ≤ inf_x {b² + b'}`.
    fn lower_bound(&self, theta: f64) -> f64;
}

/// `b(x, θ) = -θx`.
#[derive(Clone, Copy, Debug, Default)]
pub struct OuDrift;

impl Drift for OuDrift {
    fn b(&self, x: f64, theta: f64) -> f64 {
        -theta * x
    }

    fn db(&self, _x: f64, theta: f64) -> f64 {
        -theta
    }

    fn antiderivative(&self, u: f64, theta: f64) -> f64 {
        -0.5 * theta * u * u
    }

    fn lower_bound(&self, theta: f64) -> f64 {
        -theta
    }
}

pub(crate) fn check_observations(times: &[f64], obs: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidParameter("need at least two observation times".into()));
    }
    if times.len() != obs.len() {
        return Err(Error::Dimension { expected: times.len(), got: obs.len() });
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("observation times must be strictly increasing".into()));
    }
    if obs.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("observations must be finite".into()));
    }
    Ok(())
}

/// `G̃_i = exp{-½M(θ)Δt_i + A(Y_{t_i}) - A(Y_{t_{i-1}})}` for segment `i ∈ 1..=N`.
pub fn diffusion_segment_bound(i: usize, theta: f64, drift: &dyn Drift, times: &[f64], obs: &[f64]) -> Result<f64> {
    check_observations(times, obs)?;
    if i == 0 || i >= times.len() {
        return Err(Error::InvalidParameter(format!("segment index must lie in 1..={}, got {i}", times.len() - 1)));
    }
    let dt = times[i] - times[i - 1];
    let log_g = -0.5 * drift.lower_bound(theta) * dt + drift.antiderivative(obs[i], theta)
        - drift.antiderivative(obs[i - 1], theta);
    Ok(log_g.exp())
}

/// `β₂(s, θ) = 1{s ≤ max_i G̃_i}` as an indicator with `γ = 1/max_i G̃_i`.
pub fn diffusion_beta2_indicator(theta: f64, drift: &dyn Drift, times: &[f64], obs: &[f64]) -> Result<BetaSpec> {
    let mut worst = 0.0f64;
    for i in 1..times.len() {
        worst = worst.max(diffusion_segment_bound(i, theta, drift, times, obs)?);
    }
    Ok(BetaSpec::indicator(1.0 / worst))
}

/// `log G` of a discretized path on a uniform grid of step `dt`:
/// `A(X_end) - A(X_start) - ½∫(b² + b') dt`, by the trapezoid rule.
pub fn girsanov_log_weight(path: &[f64], dt: f64, theta: f64, drift: &dyn Drift) -> f64 {
    let (first, last) = (path[0], path[path.len() - 1]);
    let h = |x: f64| {
        let b = drift.b(x, theta);
        b * b + drift.db(x, theta)
    };
    let mut integral = 0.0;
    for w in path.windows(2) {
        integral += 0.5 * (h(w[0]) + h(w[1])) * dt;
    }
    drift.antiderivative(last, theta) - drift.antiderivative(first, theta) - 0.5 * integral
}

/// The OU weight written directly: `-½θ(X_end² - X_start²) - ½∫(θ²X² - θ) dt`.
pub fn ou_girsanov_log_weight(path: &[f64], dt: f64, theta: f64) -> f64 {
    let (first, last) = (path[0], path[path.len() - 1]);
    let mut integral = 0.0;
    for w in path.windows(2) {
        integral += 0.5 * (w[0] * w[0] + w[1] * w[1]) * dt;
    }
    let duration = dt * (path.len() - 1) as f64;
    -0.5 * theta * (last * last - first * first) - 0.5 * (theta * theta * integral - theta * duration)
}
