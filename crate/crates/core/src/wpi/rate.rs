//! `F(x) = ∫ₓ^{1/4} dv / K*(v)` and its inverse.

use super::kstar::KStarFn;
use crate::error::{Error, Result};
use crate::numeric::integrate;
use serde::{Deserialize, Serialize};

pub const DEFAULT_QUADRATURE_NODES: usize = 256;
pub const DEFAULT_X_MIN: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-13;
const BISECTION_LOG_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub quadrature_nodes: usize,
    pub x_min: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions { quadrature_nodes: DEFAULT_QUADRATURE_NODES, x_min: DEFAULT_X_MIN }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateValue {
    pub value: f64,
    /// The requested n lies beyond the tabulated range of F; `value` is the tabulated floor.
    pub saturated: bool,
}

#[derive(Clone, Debug)]
pub struct RateBound {
    kstar: KStarFn,
    options: RateOptions,
    /// `ln v` nodes from `ln(1/4)` downwards.
    log_nodes: Vec<f64>,
    /// `F` at each node.
    cumulative: Vec<f64>,
}

impl RateBound {
    pub fn new(kstar: KStarFn, options: RateOptions) -> Result<Self> {
        if options.quadrature_nodes < 64 {
            return Err(Error::InvalidParameter(format!(
                "quadrature_nodes must be >= 64, got {}",
                options.quadrature_nodes
            )));
        }
        if !(options.x_min > 0.0 && options.x_min < 0.25) {
            return Err(Error::InvalidParameter(format!("x_min must lie in (0, 1/4), got {}", options.x_min)));
        }
        let top = 0.25f64.ln();
        let h = (top - options.x_min.ln()) / options.quadrature_nodes as f64;
        let mut log_nodes = vec![top];
        let mut cumulative = vec![0.0];
        for i in 1..=options.quadrature_nodes {
            let t = if i == options.quadrature_nodes { options.x_min.ln() } else { top - h * i as f64 };
            if !(kstar.eval(t.exp()) > 0.0) {
                break;
            }
            let piece = integrate(&|t| integrand(&kstar, t), t, log_nodes[i - 1], QUAD_REL_TOL);
            if !piece.is_finite() {
                break;
            }
            log_nodes.push(t);
            cumulative.push(cumulative[i - 1] + piece);
        }
        Ok(RateBound { kstar, options, log_nodes, cumulative })
    }

    pub fn with_defaults(kstar: KStarFn) -> Result<Self> {
        Self::new(kstar, RateOptions::default())
    }

    pub fn kstar(&self) -> &KStarFn {
        &self.kstar
    }

    pub fn options(&self) -> RateOptions {
        self.options
    }

    /// Smallest tabulated x; equals `x_min` unless K* vanishes above it.
    pub fn floor(&self) -> f64 {
        if self.log_nodes.len() == self.options.quadrature_nodes + 1 {
            return self.options.x_min;
        }
        self.log_nodes.last().unwrap().exp()
    }

    /// `F(x)` for `x ∈ (x_min, 1/4]`; infinite below the tabulated floor.
    pub fn f(&self, x: f64) -> Result<f64> {
        if !(x > self.options.x_min) || x > 0.25 {
            return Err(Error::Domain(format!(
                "F is tabulated on (x_min, 1/4] with x_min = {:e}, got {x}",
                self.options.x_min
            )));
        }
        let t = x.ln();
        let last = *self.log_nodes.last().unwrap();
        if t < last {
            return Ok(f64::INFINITY);
        }
        // nodes are decreasing; find the first node at or below t
        let i = self.log_nodes.partition_point(|&node| node > t);
        if i < self.log_nodes.len() && self.log_nodes[i] == t {
            return Ok(self.cumulative[i]);
        }
        Ok(self.partial(i, t))
    }

    /// F at `t` inside segment `(log_nodes[i], log_nodes[i-1])`.
    fn partial(&self, i: usize, t: f64) -> f64 {
        self.cumulative[i - 1] + integrate(&|s| integrand(&self.kstar, s), t, self.log_nodes[i - 1], QUAD_REL_TOL)
    }

    /// `F⁻¹(n)`; bisection keeps the larger endpoint.
    pub fn inverse(&self, n: f64) -> RateValue {
        if !(n > 0.0) {
            return RateValue { value: 0.25, saturated: false };
        }
        let total = *self.cumulative.last().unwrap();
        if n > total {
            return RateValue { value: self.floor(), saturated: true };
        }
        let i = self.cumulative.partition_point(|&c| c < n);
        if self.cumulative[i] == n {
            return RateValue { value: self.log_nodes[i].exp(), saturated: false };
        }
        // F(e^lo) >= n >= F(e^hi)
        let (mut lo, mut hi) = (self.log_nodes[i], self.log_nodes[i - 1]);
        while hi - lo > BISECTION_LOG_TOL {
            let mid = 0.5 * (lo + hi);
            if self.partial(i, mid) >= n {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        RateValue { value: hi.exp(), saturated: false }
    }

    /// Bound on `‖Tⁿf‖² / ‖f‖²_osc`, i.e. `F⁻¹(n - n_offset)`.
    pub fn bound(&self, n: f64) -> RateValue {
        self.inverse(n - self.kstar.n_offset as f64)
    }

    pub fn curve(&self, ns: &[f64]) -> Vec<RateValue> {
        ns.iter().map(|&n| self.bound(n)).collect()
    }
}

fn integrand(kstar: &KStarFn, t: f64) -> f64 {
    let v = t.exp();
    v / kstar.eval(v)
}
