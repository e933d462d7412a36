//! Explicit rate envelope for `β(s) = c exp(-(a ln s + b)²)`.
//!
//! With `u_v = exp(-(√(-δ' ln v) - b)/a)` the conjugate satisfies
//! `K*(v) ≥ C v exp(-(√(-δ' ln v) - b)/a)` below `v̄`, which integrates in closed form and
//! yields `F⁻¹(n) ≤ exp(-t(n)²/δ')`. Any `δ' < δ` then gives a finite constant `C̃` with
//! `F⁻¹(n) ≤ C̃ exp(-(a²/δ) ln² n)` for every `n ≥ n₀`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpLogSquareRate {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    /// Exponent used for the intermediate bound, `1 < δ' < δ`.
    pub internal_delta: f64,
    pub c_tilde: f64,
    pub n0: f64,
    v_bar: f64,
    lower_const: f64,
    offset_const: f64,
}

struct Construction {
    v_bar: f64,
    lower_const: f64,
    offset_const: f64,
    n0: f64,
}

fn construct(c: f64, a: f64, b: f64, dp: f64) -> Construction {
    let v_bar = 0.25f64.min((0.5 / c).powf(1.0 / (dp - 1.0)));
    let lower_const = 1.0 - c * v_bar.powf(dp - 1.0);
    let lower = |v: f64| lower_const * v * (-((-dp * v.ln()).sqrt() - b) / a).exp();
    let offset_const = (0.25 - v_bar) / lower(v_bar);
    Construction { v_bar, lower_const, offset_const, n0: offset_const.max(1.0) }
}

/// Solves `e^{t/a}(t - a) = A (n - D) + e^{t̄/a}(t̄ - a)` for `t ≥ t̄`, with `n = e^{ln_n}`.
fn solve_t(a: f64, b: f64, dp: f64, k: &Construction, ln_n: f64) -> f64 {
    let t_bar = (-dp * k.v_bar.ln()).sqrt();
    let slope = k.lower_const * dp * (b / a).exp() / (2.0 * a);
    let base = (t_bar / a).exp() * (t_bar - a);
    let ln_rhs = if ln_n < 600.0 {
        let r = slope * (ln_n.exp() - k.offset_const) + base;
        if r <= 0.0 {
            None
        } else {
            Some(r.ln())
        }
    } else {
        Some(slope.ln() + ln_n)
    };
    let rhs_direct = if ln_n < 600.0 { slope * (ln_n.exp() - k.offset_const) + base } else { f64::INFINITY };
    // true when the left side at t is at least the right side
    let above = |t: f64| -> bool {
        if t <= a {
            (t / a).exp() * (t - a) >= rhs_direct
        } else {
            match ln_rhs {
                None => true,
                Some(lr) => t / a + (t - a).ln() >= lr,
            }
        }
    };
    let mut lo = t_bar;
    let mut hi = t_bar.max(a) + 1.0;
    while !above(hi) {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    // the smaller root endpoint gives the larger (conservative) bound
    lo
}

fn log_c_tilde(a: f64, b: f64, delta: f64, dp: f64, k: &Construction) -> f64 {
    let l0 = k.n0.ln();
    let mut best = f64::NEG_INFINITY;
    let points = 20_000;
    let span = (1e5f64 + 1.0).ln();
    for i in 0..=points {
        let l = l0 + ((span * i as f64 / points as f64).exp() - 1.0);
        let t = solve_t(a, b, dp, k, l);
        let log_ratio = -t * t / dp + a * a / delta * l * l;
        best = best.max(log_ratio);
    }
    best
}

/// Builds the envelope, choosing the internal exponent that minimizes `C̃`.
pub fn exp_log_square_rate(c: f64, a: f64, b: f64, delta: f64) -> Result<ExpLogSquareRate> {
    if !(delta > 1.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must exceed 1, got {delta}")));
    }
    if !(c > 0.0) || !(a > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter("need c > 0, a > 0 and finite b".into()));
    }
    let mut best: Option<(f64, f64, Construction)> = None;
    for k in 1..16 {
        let dp = 1.0 + (delta - 1.0) * k as f64 / 16.0;
        let cons = construct(c, a, b, dp);
        let lc = log_c_tilde(a, b, delta, dp, &cons);
        if best.as_ref().is_none_or(|(l, _, _)| lc < *l) {
            best = Some((lc, dp, cons));
        }
    }
    let (lc, dp, cons) = best.unwrap();
    Ok(ExpLogSquareRate {
        c,
        a,
        b,
        delta,
        internal_delta: dp,
        c_tilde: (lc + 1e-3).exp(),
        n0: cons.n0,
        v_bar: cons.v_bar,
        lower_const: cons.lower_const,
        offset_const: cons.offset_const,
    })
}

impl ExpLogSquareRate {
    fn construction(&self) -> Construction {
        Construction {
            v_bar: self.v_bar,
            lower_const: self.lower_const,
            offset_const: self.offset_const,
            n0: self.n0,
        }
    }

    /// Lower bound on `K*(v)` for `v ≤ v̄`.
    pub fn kstar_lower(&self, v: f64) -> f64 {
        let dp = self.internal_delta;
        self.lower_const * v * (-((-dp * v.ln()).sqrt() - self.b) / self.a).exp()
    }

    /// `exp(-t(n)²/δ')`, an upper bound on `F⁻¹(n)` for `n ≥ n₀`.
    pub fn constructive_bound(&self, n: f64) -> f64 {
        if n < self.n0 {
            return 0.25;
        }
        let t = solve_t(self.a, self.b, self.internal_delta, &self.construction(), n.ln());
        (-t * t / self.internal_delta).exp().min(0.25)
    }

    /// `C̃ exp(-(a²/δ) ln² n)`.
    pub fn envelope(&self, n: f64) -> f64 {
        let l = n.ln();
        self.c_tilde * (-self.a * self.a / self.delta * l * l).exp()
    }
}
