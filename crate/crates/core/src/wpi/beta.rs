//! Decreasing WPI functions `β: (0, ∞) → [0, ∞)`.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default ceiling applied to β values.
pub const DEFAULT_CAP: f64 = 0.25;

/// Default number of parameter draws for a Monte Carlo mixture.
pub const DEFAULT_MIXTURE_SAMPLES: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BetaFamily {
    /// `1{s ≤ 1/γ}`.
    Indicator { gamma: f64 },
    /// `C s^{-α}`.
    PowerLaw { coefficient: f64, alpha: f64 },
    /// `c exp(-(a ln s + b)²)` for `s ≥ e^{-b/a}`, `c` below.
    ExpLogSquare { c: f64, a: f64, b: f64 },
    /// Step function through `(s, value)` knots, held constant to the right of each knot.
    Table { knots: Vec<(f64, f64)> },
    Sum { children: Vec<BetaSpec> },
    /// `child(s - 1)` for `s > 1`, `1/4` otherwise.
    AdjointShift { child: Box<BetaSpec> },
    /// Weighted average of children; Monte Carlo mixtures store their cached draws here.
    Mixture {
        children: Vec<BetaSpec>,
        weights: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "BetaSpecRaw", into = "BetaSpecRaw")]
pub struct BetaSpec {
    pub family: BetaFamily,
    pub cap: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct BetaSpecRaw {
    #[serde(flatten)]
    family: BetaFamily,
    #[serde(default, deserialize_with = "present")]
    cap: Option<Option<f64>>,
}

fn present<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

impl From<BetaSpecRaw> for BetaSpec {
    fn from(raw: BetaSpecRaw) -> Self {
        let cap = raw.cap.unwrap_or_else(|| default_cap(&raw.family));
        BetaSpec { family: raw.family, cap }
    }
}

impl From<BetaSpec> for BetaSpecRaw {
    fn from(spec: BetaSpec) -> Self {
        BetaSpecRaw { family: spec.family, cap: Some(spec.cap) }
    }
}

/// Indicators keep their literal 0/1 values and sums are raw; every other family is capped at 1/4.
pub fn default_cap(family: &BetaFamily) -> Option<f64> {
    match family {
        BetaFamily::Indicator { .. } | BetaFamily::Sum { .. } => None,
        _ => Some(DEFAULT_CAP),
    }
}

impl BetaSpec {
    fn with_default_cap(family: BetaFamily) -> Self {
        let cap = default_cap(&family);
        BetaSpec { family, cap }
    }

    pub fn indicator(gamma: f64) -> Self {
        Self::with_default_cap(BetaFamily::Indicator { gamma })
    }

    pub fn power_law(coefficient: f64, alpha: f64) -> Self {
        Self::with_default_cap(BetaFamily::PowerLaw { coefficient, alpha })
    }

    pub fn exp_log_square(c: f64, a: f64, b: f64) -> Self {
        Self::with_default_cap(BetaFamily::ExpLogSquare { c, a, b })
    }

    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        let spec = Self::with_default_cap(BetaFamily::Table { knots });
        spec.validate()?;
        Ok(spec)
    }

    pub fn sum(children: Vec<BetaSpec>) -> Self {
        Self::with_default_cap(BetaFamily::Sum { children })
    }

    pub fn adjoint_shift(child: BetaSpec) -> Self {
        Self::with_default_cap(BetaFamily::AdjointShift { child: Box::new(child) })
    }

    pub fn mixture(children: Vec<BetaSpec>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        let spec = Self::with_default_cap(BetaFamily::Mixture {
            children,
            weights: weights.iter().map(|w| w / total).collect(),
            seed: None,
        });
        spec.validate()?;
        Ok(spec)
    }

    /// Average of `samples` children drawn by `draw` from a seeded stream; draws are cached.
    pub fn monte_carlo_mixture(
        samples: usize,
        seed: u64,
        mut draw: impl FnMut(&mut ChaCha8Rng) -> BetaSpec,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidSpec("mixture needs at least one sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let children: Vec<BetaSpec> = (0..samples).map(|_| draw(&mut rng)).collect();
        let spec = Self::with_default_cap(BetaFamily::Mixture {
            children,
            weights: vec![1.0 / samples as f64; samples],
            seed: Some(seed),
        });
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_cap(mut self, cap: Option<f64>) -> Self {
        self.cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.cap {
            if !(c > 0.0) {
                return Err(Error::InvalidSpec(format!("cap must be positive, got {c}")));
            }
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match &self.family {
            BetaFamily::Indicator { gamma } => positive("gamma", *gamma),
            BetaFamily::PowerLaw { coefficient, alpha } => {
                positive("coefficient", *coefficient)?;
                positive("alpha", *alpha)
            }
            BetaFamily::ExpLogSquare { c, a, b } => {
                positive("c", *c)?;
                positive("a", *a)?;
                if b.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec("b must be finite".into()))
                }
            }
            BetaFamily::Table { knots } => {
                if knots.is_empty() {
                    return Err(Error::InvalidSpec("empty table".into()));
                }
                for w in knots.windows(2) {
                    if !(w[0].0 < w[1].0) {
                        return Err(Error::InvalidSpec("table knots must be strictly increasing in s".into()));
                    }
                    if w[1].1 > w[0].1 {
                        return Err(Error::InvalidSpec("table values must be nonincreasing".into()));
                    }
                }
                if knots.iter().any(|&(s, v)| !(s > 0.0) || !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidSpec("table knots need s > 0 and finite values >= 0".into()));
                }
                Ok(())
            }
            BetaFamily::Sum { children } => {
                if children.is_empty() {
                    return Err(Error::InvalidSpec("empty sum".into()));
                }
                children.iter().try_for_each(BetaSpec::validate)
            }
            BetaFamily::AdjointShift { child } => child.validate(),
            BetaFamily::Mixture { children, weights, .. } => {
                if children.is_empty() || children.len() != weights.len() {
                    return Err(Error::InvalidSpec("mixture needs matching nonempty children and weights".into()));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::InvalidSpec("mixture weights must be nonnegative".into()));
                }
                children.iter().try_for_each(BetaSpec::validate)
            }
        }
    }

    /// `β(s)` with domain checking.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("beta needs s > 0, got {s}")));
        }
        if let BetaFamily::Table { knots } = &self.family {
            if knots.is_empty() {
                return Err(Error::InvalidSpec("empty table".into()));
            }
        }
        Ok(self.value(s))
    }

    /// `β(s)` for `s > 0`, without checks.
    pub fn value(&self, s: f64) -> f64 {
        let raw = match &self.family {
            BetaFamily::Indicator { gamma } => {
                if s <= 1.0 / gamma {
                    1.0
                } else {
                    0.0
                }
            }
            BetaFamily::PowerLaw { coefficient, alpha } => coefficient * s.powf(-alpha),
            BetaFamily::ExpLogSquare { c, a, b } => {
                let z = a * s.ln() + b;
                if z >= 0.0 {
                    c * (-z * z).exp()
                } else {
                    *c
                }
            }
            BetaFamily::Table { knots } => {
                let idx = knots.partition_point(|&(k, _)| k <= s);
                knots[idx.saturating_sub(1)].1
            }
            BetaFamily::Sum { children } => children.iter().map(|c| c.value(s)).sum(),
            BetaFamily::AdjointShift { child } => {
                if s > 1.0 {
                    child.value(s - 1.0)
                } else {
                    0.25
                }
            }
            BetaFamily::Mixture { children, weights, .. } => {
                children.iter().zip(weights).map(|(c, w)| w * c.value(s)).sum()
            }
        };
        match self.cap {
            Some(c) => raw.min(c),
            None => raw,
        }
    }

    /// If every leaf is an indicator combined by sums or mixtures, the weighted thresholds `(γ, w)`.
    pub(crate) fn indicator_weights(&self) -> Option<Vec<(f64, f64)>> {
        match &self.family {
            BetaFamily::Indicator { gamma } => Some(vec![(*gamma, 1.0)]),
            BetaFamily::Sum { children } => {
                let mut out = Vec::new();
                for c in children {
                    out.extend(c.indicator_weights()?);
                }
                Some(out)
            }
            BetaFamily::Mixture { children, weights, .. } => {
                let mut out = Vec::new();
                for (c, w) in children.iter().zip(weights) {
                    out.extend(c.indicator_weights()?.into_iter().map(|(g, cw)| (g, cw * w)));
                }
                Some(out)
            }
            _ => None,
        }
    }
}

/// `Sum(children)` with the cap disabled.
pub fn tensorize(children: Vec<BetaSpec>) -> Result<BetaSpec> {
    if children.is_empty() {
        return Err(Error::InvalidSpec("tensorize needs at least one child".into()));
    }
    let spec = BetaSpec::sum(children).with_cap(None);
    spec.validate()?;
    Ok(spec)
}

/// β for the adjoint chain: `child(s - 1)` above 1, `1/4` on `(0, 1]`.
pub fn adjoint_transform_beta(b: BetaSpec) -> BetaSpec {
    BetaSpec::adjoint_shift(b)
}

/// Shorthand `indicator:γ`, `power_law:C:α` or `exp_log_square:c:a:b`, validated.
impl std::str::FromStr for BetaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let nums: Vec<f64> = parts[1..]
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidSpec(format!("cannot parse numbers in '{s}'")))?;
        let spec = match (parts[0].trim(), nums.as_slice()) {
            ("indicator", [g]) => BetaSpec::indicator(*g),
            ("power_law", [c, a]) => BetaSpec::power_law(*c, *a),
            ("exp_log_square", [c, a, b]) => BetaSpec::exp_log_square(*c, *a, *b),
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "unknown beta shorthand '{s}'; expected indicator:G, power_law:C:ALPHA or exp_log_square:C:A:B"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}
