//! Lambert W, incomplete gamma and normal tail functions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `1/e`.
pub const INV_E: f64 = 0.367_879_441_171_442_33;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Principal,
    MinusOne,
}

/// Real branches of the Lambert W function, refined by Halley iteration.
pub fn lambert_w(branch: Branch, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("lambert_w argument {x} is not finite")));
    }
    // tolerate round-off right at the branch point
    let x = if x < -INV_E && x > -INV_E * (1.0 + 4.0 * f64::EPSILON) { -INV_E } else { x };
    if x < -INV_E {
        return Err(Error::Domain(format!("lambert_w argument {x} < -1/e")));
    }
    if branch == Branch::MinusOne && x >= 0.0 {
        return Err(Error::Domain(format!("lambert_w branch -1 needs x < 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let branch_dist = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
    let mut w = match branch {
        Branch::Principal => {
            if x < -0.32 {
                let p = branch_dist;
                -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
            } else if x < 3.0 {
                let l = (1.0 + x).ln();
                l * (1.0 - (1.0 + l).ln() / (2.0 + l))
            } else {
                let l1 = x.ln();
                let l2 = l1.ln();
                l1 - l2 + l2 / l1
            }
        }
        Branch::MinusOne => {
            if x < -0.25 {
                let p = -branch_dist;
                -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
            } else {
                let l1 = (-x).ln();
                let l2 = (-l1).ln();
                l1 - l2 + l2 / l1
            }
        }
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if f == 0.0 || wp1.abs() < 1e-9 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let dw = f / denom;
        w -= dw;
        if dw.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(match branch {
        Branch::Principal => w.max(-1.0),
        Branch::MinusOne => w.min(-1.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaKind {
    Lower,
    Upper,
}

/// Complete gamma function.
pub fn gamma(s: f64) -> f64 {
    libm::tgamma(s)
}

/// Unnormalized incomplete gamma: `lower = ∫₀ˣ t^{s-1}e^{-t}dt`, `upper = Γ(s) - lower`.
pub fn incomplete_gamma(kind: GammaKind, s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("incomplete_gamma needs s > 0, got {s}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("incomplete_gamma needs x >= 0, got {x}")));
    }
    let full = gamma(s);
    if x == 0.0 {
        return Ok(match kind {
            GammaKind::Lower => 0.0,
            GammaKind::Upper => full,
        });
    }
    if x.is_infinite() {
        return Ok(match kind {
            GammaKind::Lower => full,
            GammaKind::Upper => 0.0,
        });
    }
    let log_prefactor = s * x.ln() - x;
    let (lower, upper) = if x < s + 1.0 {
        let lower = log_prefactor.exp() * lower_series(s, x);
        (lower, (full - lower).max(0.0))
    } else {
        let upper = log_prefactor.exp() * upper_continued_fraction(s, x);
        ((full - upper).max(0.0), upper)
    };
    Ok(match kind {
        GammaKind::Lower => lower,
        GammaKind::Upper => upper,
    })
}

/// Regularized incomplete gamma `P(s, x)` (lower) or `Q(s, x)` (upper).
/// Stays finite for shapes where `Γ(s)` overflows.
pub fn regularized_gamma(kind: GammaKind, s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("regularized_gamma needs s > 0, got {s}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("regularized_gamma needs x >= 0, got {x}")));
    }
    let (p, q) = if x == 0.0 {
        (0.0, 1.0)
    } else if x.is_infinite() {
        (1.0, 0.0)
    } else {
        let log_prefactor = s * x.ln() - x - libm::lgamma(s);
        if x < s + 1.0 {
            let p = (log_prefactor.exp() * lower_series(s, x)).min(1.0);
            (p, 1.0 - p)
        } else {
            let q = (log_prefactor.exp() * upper_continued_fraction(s, x)).min(1.0);
            (1.0 - q, q)
        }
    };
    Ok(match kind {
        GammaKind::Lower => p,
        GammaKind::Upper => q,
    })
}

fn lower_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    for n in 1..10_000 {
        term *= x / (s + n as f64);
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum
}

// modified Lentz evaluation
fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Standard normal cdf.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}
