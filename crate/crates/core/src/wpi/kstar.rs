//! Convex-conjugate rate functions `K*` and their transformations.

use super::beta::BetaSpec;
use crate::error::{Error, Result};
use crate::numeric::{golden_max, log_grid, lower_convex_envelope};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const U_GRID_MIN: f64 = 1e-8;
pub const U_GRID_MAX: f64 = 1e8;
pub const U_GRID_POINTS: usize = 4096;
const GOLDEN_ITERATIONS: usize = 120;
const SUBUNIT_TOL: f64 = 1e-12;

/// Log-spaced v-grid on `[1e-12, 1/4]` used when a β has to be conjugated implicitly.
pub fn default_v_grid() -> Vec<f64> {
    log_grid(1e-12, 0.25, 512)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "repr", rename_all = "snake_case")]
pub enum KStarRepr {
    Linear {
        slope: f64,
    },
    Power {
        coefficient: f64,
        exponent: f64,
    },
    /// `post_scale · outer(inner(pre_scale · v))`.
    Composite {
        outer: Box<KStarFn>,
        inner: Box<KStarFn>,
        pre_scale: f64,
        post_scale: f64,
    },
    Grid {
        knots: Vec<f64>,
        values: Vec<f64>,
        convexified: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KStarFn {
    #[serde(flatten)]
    pub repr: KStarRepr,
    pub subunit_verified: bool,
    /// Evaluates as `min(K*(v), v)`.
    #[serde(default)]
    pub clamped: bool,
    /// Rate is read at `F⁻¹(n - n_offset)`.
    #[serde(default)]
    pub n_offset: u32,
}

impl KStarFn {
    fn from_repr(repr: KStarRepr) -> Self {
        let mut k = KStarFn { repr, subunit_verified: false, clamped: false, n_offset: 0 };
        k.subunit_verified = k.check_subunit();
        k
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if !(slope >= 0.0) || !slope.is_finite() {
            return Err(Error::InvalidSpec(format!("linear slope must be finite and >= 0, got {slope}")));
        }
        Ok(Self::from_repr(KStarRepr::Linear { slope }))
    }

    pub fn identity() -> Self {
        Self::from_repr(KStarRepr::Linear { slope: 1.0 })
    }

    pub fn power(coefficient: f64, exponent: f64) -> Result<Self> {
        if !(coefficient > 0.0) || !coefficient.is_finite() {
            return Err(Error::InvalidSpec(format!("power coefficient must be positive, got {coefficient}")));
        }
        if !(exponent >= 1.0) || !exponent.is_finite() {
            return Err(Error::InvalidSpec(format!("power exponent must be >= 1, got {exponent}")));
        }
        Ok(Self::from_repr(KStarRepr::Power { coefficient, exponent }))
    }

    /// Grid-backed K*, replaced by the lower convex envelope of the knots together with the origin.
    pub fn grid(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::InvalidSpec("grid needs matching nonempty knots and values".into()));
        }
        if !(knots[0] > 0.0) || knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSpec("grid knots must be positive and strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidSpec("grid values must be finite and >= 0".into()));
        }
        let mut xs = Vec::with_capacity(knots.len() + 1);
        let mut ys = Vec::with_capacity(knots.len() + 1);
        xs.push(0.0);
        ys.push(0.0);
        xs.extend_from_slice(&knots);
        ys.extend_from_slice(&values);
        let hull = lower_convex_envelope(&xs, &ys);
        let values = hull[1..].iter().map(|v| v.max(0.0)).collect();
        Ok(Self::from_repr(KStarRepr::Grid { knots, values, convexified: true }))
    }

    pub fn as_linear(&self) -> Option<f64> {
        match (&self.repr, self.clamped) {
            (KStarRepr::Linear { slope }, false) => Some(*slope),
            _ => None,
        }
    }

    pub fn with_offset(mut self, n_offset: u32) -> Self {
        self.n_offset = n_offset;
        self
    }

    pub fn eval(&self, v: f64) -> f64 {
        if !(v > 0.0) {
            return 0.0;
        }
        let raw = match &self.repr {
            KStarRepr::Linear { slope } => slope * v,
            KStarRepr::Power { coefficient, exponent } => coefficient * v.powf(*exponent),
            KStarRepr::Composite { outer, inner, pre_scale, post_scale } => {
                post_scale * outer.eval(inner.eval(pre_scale * v))
            }
            KStarRepr::Grid { knots, values, .. } => grid_eval(knots, values, v),
        };
        if self.clamped {
            raw.min(v)
        } else {
            raw
        }
    }

    fn check_subunit(&self) -> bool {
        if self.clamped {
            return true;
        }
        match &self.repr {
            KStarRepr::Linear { slope } => *slope <= 1.0 + SUBUNIT_TOL,
            KStarRepr::Power { coefficient, exponent } => {
                coefficient * 0.25f64.powf(exponent - 1.0) <= 1.0 + SUBUNIT_TOL
            }
            KStarRepr::Grid { knots, .. } => {
                let mut pts = log_grid(1e-12, 0.25, 256);
                pts.extend(knots.iter().copied().filter(|&k| k <= 0.25));
                pts.iter().all(|&v| self.eval(v) <= v * (1.0 + SUBUNIT_TOL))
            }
            KStarRepr::Composite { .. } => {
                log_grid(1e-12, 0.25, 256).iter().all(|&v| self.eval(v) <= v * (1.0 + SUBUNIT_TOL))
            }
        }
    }

    /// Replaces `K*` by `min(K*, v)` unless `K*(v) ≤ v` was verified.
    pub fn subunit_guard(&self) -> KStarFn {
        if self.subunit_verified {
            return self.clone();
        }
        if let KStarRepr::Linear { slope } = self.repr {
            let mut k = Self::from_repr(KStarRepr::Linear { slope: slope.min(1.0) });
            k.n_offset = self.n_offset;
            return k;
        }
        let mut k = self.clone();
        k.clamped = true;
        k.subunit_verified = true;
        k
    }

    /// Human-readable formula in the variable `v`.
    pub fn describe(&self) -> String {
        self.describe_at("v")
    }

    fn describe_at(&self, arg: &str) -> String {
        let body = match &self.repr {
            KStarRepr::Linear { slope } => format!("{slope}*{arg}"),
            KStarRepr::Power { coefficient, exponent } => format!("{coefficient}*({arg})^{exponent}"),
            KStarRepr::Composite { outer, inner, pre_scale, post_scale } => {
                let inner_arg = if *pre_scale == 1.0 { arg.to_string() } else { format!("{pre_scale}*{arg}") };
                let applied = outer.describe_at(&inner.describe_at(&inner_arg));
                if *post_scale == 1.0 {
                    applied
                } else {
                    format!("{post_scale}*[{applied}]")
                }
            }
            KStarRepr::Grid { knots, .. } => format!("grid{}({arg})", knots.len()),
        };
        if self.clamped {
            format!("min({body}, {arg})")
        } else {
            format!("({body})")
        }
    }
}

fn grid_eval(knots: &[f64], values: &[f64], v: f64) -> f64 {
    let n = knots.len();
    if n == 1 {
        return values[0] * v / knots[0];
    }
    let i = knots.partition_point(|&k| k < v);
    if i < n && knots[i] == v {
        return values[i];
    }
    let (a, b) = if i == 0 {
        (0, 1)
    } else if i >= n {
        (n - 2, n - 1)
    } else {
        (i - 1, i)
    };
    let (x0, y0, x1, y1) = (knots[a], values[a], knots[b], values[b]);
    if y0 > 0.0 && y1 > 0.0 {
        let mut q = (y1 / y0).ln() / (x1 / x0).ln();
        if i == 0 {
            q = q.max(1.0);
        }
        y0 * (v / x0).powf(q)
    } else {
        (y0 + (y1 - y0) * (v - x0) / (x1 - x0)).max(0.0)
    }
}

/// `post · outer(inner(pre · v))`, collapsing closed forms where possible.
pub(crate) fn compose(outer: &KStarFn, inner: &KStarFn, pre: f64, post: f64) -> KStarFn {
    use KStarRepr::{Linear, Power};
    if !outer.clamped && !inner.clamped {
        let closed = match (&outer.repr, &inner.repr) {
            (Linear { slope: a }, Linear { slope: b }) => Some(Linear { slope: post * a * b * pre }),
            (Linear { slope: a }, Power { coefficient: c, exponent: p }) => {
                Some(Power { coefficient: post * a * c * pre.powf(*p), exponent: *p })
            }
            (Power { coefficient: c, exponent: p }, Linear { slope: b }) => {
                Some(Power { coefficient: post * c * (b * pre).powf(*p), exponent: *p })
            }
            (Power { coefficient: c1, exponent: p1 }, Power { coefficient: c2, exponent: p2 }) => Some(Power {
                coefficient: post * c1 * c2.powf(*p1) * pre.powf(p1 * p2),
                exponent: p1 * p2,
            }),
            _ => None,
        };
        if let Some(repr) = closed {
            return KStarFn::from_repr(repr);
        }
    }
    if let (Some(b), false) = (inner.as_linear(), outer.clamped) {
        if pre * b == 1.0 && post == 1.0 {
            return outer.clone();
        }
        return KStarFn::from_repr(KStarRepr::Composite {
            outer: Box::new(outer.clone()),
            inner: Box::new(KStarFn::identity()),
            pre_scale: pre * b,
            post_scale: post,
        });
    }
    if let Some(a) = outer.as_linear() {
        return KStarFn::from_repr(KStarRepr::Composite {
            outer: Box::new(inner.clone()),
            inner: Box::new(KStarFn::identity()),
            pre_scale: pre,
            post_scale: post * a,
        });
    }
    KStarFn::from_repr(KStarRepr::Composite {
        outer: Box::new(outer.clone()),
        inner: Box::new(inner.clone()),
        pre_scale: pre,
        post_scale: post,
    })
}

fn check_v_grid(v_grid: &[f64]) -> Result<()> {
    if v_grid.is_empty() {
        return Err(Error::InvalidSpec("empty v-grid".into()));
    }
    if !(v_grid[0] > 0.0) || *v_grid.last().unwrap() > 0.25 || v_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("v-grid must be strictly increasing inside (0, 1/4]".into()));
    }
    Ok(())
}

/// `K*(v) = sup_u {uv - u β(1/u)}` on `v_grid`, closed form where the family allows it.
pub fn conjugate(spec: &BetaSpec, v_grid: &[f64]) -> Result<KStarFn> {
    use super::beta::BetaFamily;
    spec.validate()?;
    check_v_grid(v_grid)?;
    let v_max = *v_grid.last().unwrap();
    let cap_inactive = spec.cap.is_none_or(|c| c >= v_max);
    match &spec.family {
        BetaFamily::Indicator { gamma } if cap_inactive => KStarFn::linear(*gamma),
        BetaFamily::PowerLaw { coefficient, alpha } if cap_inactive => {
            let c = alpha / (1.0 + alpha) * (coefficient * (1.0 + alpha)).powf(-1.0 / alpha);
            KStarFn::power(c, 1.0 + 1.0 / alpha)
        }
        _ => match indicator_thresholds(spec) {
            Some(weights) => indicator_mixture_conjugate(weights, v_grid),
            None => conjugate_numeric(&|s| spec.value(s), v_grid),
        },
    }
}

fn indicator_thresholds(spec: &BetaSpec) -> Option<Vec<(f64, f64)>> {
    fn caps_inactive(spec: &BetaSpec) -> bool {
        use super::beta::BetaFamily;
        match &spec.family {
            BetaFamily::Indicator { .. } => spec.cap.is_none_or(|c| c >= 1.0),
            BetaFamily::Sum { children } | BetaFamily::Mixture { children, .. } => {
                spec.cap.is_none_or(|c| c >= 0.25) && children.iter().all(caps_inactive)
            }
            _ => false,
        }
    }
    if caps_inactive(spec) {
        spec.indicator_weights()
    } else {
        None
    }
}

/// Exact conjugate of `Σ w_i 1{s ≤ 1/γ_i}`: `max_k γ_k (v - W(γ < γ_k))`.
fn indicator_mixture_conjugate(mut weights: Vec<(f64, f64)>, v_grid: &[f64]) -> Result<KStarFn> {
    weights.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let mut lines = Vec::new();
    let mut below = 0.0;
    let mut i = 0;
    while i < weights.len() {
        let g = weights[i].0;
        lines.push((g, below));
        while i < weights.len() && weights[i].0 == g {
            below += weights[i].1;
            i += 1;
        }
    }
    let mut values = Vec::with_capacity(v_grid.len());
    for &v in v_grid {
        if v > total {
            return Err(Error::UnboundedConjugate(format!(
                "indicator mass {total} is below v = {v}, so the supremum over u diverges"
            )));
        }
        let k = lines.iter().map(|&(g, w)| g * (v - w)).fold(0.0, f64::max);
        values.push(k);
    }
    KStarFn::grid(v_grid.to_vec(), values)
}

/// Grid maximization of `u(v - β(1/u))` over the log u-grid with golden-section refinement.
pub fn conjugate_numeric(beta: &dyn Fn(f64) -> f64, v_grid: &[f64]) -> Result<KStarFn> {
    check_v_grid(v_grid)?;
    let u = log_grid(U_GRID_MIN, U_GRID_MAX, U_GRID_POINTS);
    let k: Vec<f64> = u.iter().map(|&u| u * beta(1.0 / u)).collect();
    let n = u.len();
    let mut values = Vec::with_capacity(v_grid.len());
    for &v in v_grid {
        let mut best = 0.0;
        let mut arg = None;
        for j in 0..n {
            let g = u[j] * v - k[j];
            if g > best {
                best = g;
                arg = Some(j);
            }
        }
        if let Some(j) = arg {
            if j == n - 1 && u[n - 1] * v - k[n - 1] > u[n - 2] * v - k[n - 2] {
                return Err(Error::UnboundedConjugate(format!(
                    "sup over u is still increasing at u = {U_GRID_MAX:e} for v = {v}"
                )));
            }
            let lo = u[j.saturating_sub(1)];
            let hi = u[(j + 1).min(n - 1)];
            let (_, g) = golden_max(&|x| x * v - x * beta(1.0 / x), lo, hi, GOLDEN_ITERATIONS);
            best = best.max(g);
        }
        values.push(best);
    }
    KStarFn::grid(v_grid.to_vec(), values)
}

/// [`conjugate_numeric`] applied to `s ↦ β(λ s)`, mapped back through `K*(v) = K̃*(v)/λ`.
/// Moves the u-grid so that it covers `s ∈ [λ·10⁻⁸, λ·10⁸]`.
pub fn conjugate_numeric_rescaled(beta: &dyn Fn(f64) -> f64, v_grid: &[f64], lambda: f64) -> Result<KStarFn> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("rescaling factor must be positive, got {lambda}")));
    }
    let shifted = conjugate_numeric(&|s| beta(lambda * s), v_grid)?;
    Ok(compose(&shifted, &KStarFn::identity(), 1.0, 1.0 / lambda))
}

/// Either a β to be conjugated or an explicit K*.
#[derive(Clone, Debug)]
pub enum Operand {
    Beta(BetaSpec),
    KStar(KStarFn),
}

impl From<BetaSpec> for Operand {
    fn from(b: BetaSpec) -> Self {
        Operand::Beta(b)
    }
}

impl From<KStarFn> for Operand {
    fn from(k: KStarFn) -> Self {
        Operand::KStar(k)
    }
}

impl Operand {
    pub fn into_kstar(self) -> Result<KStarFn> {
        match self {
            Operand::Beta(b) => conjugate(&b, &default_v_grid()),
            Operand::KStar(k) => Ok(k),
        }
    }
}

/// `K₂* ∘ K₁*` for consecutive WPIs.
pub fn chain(first: impl Into<Operand>, second: impl Into<Operand>) -> Result<KStarFn> {
    let inner = first.into().into_kstar()?;
    let outer = second.into().into_kstar()?;
    Ok(compose(&outer, &inner, 1.0, 1.0))
}

/// `v ↦ c1 c2 K*(v / c1)`; the induced rates satisfy `F̃⁻¹(x) ≤ c1 F⁻¹(c2 x)` when `c1 ≥ 1`.
pub fn scale(k: &KStarFn, c1: f64, c2: f64) -> Result<KStarFn> {
    if !(c1 > 0.0) || !(c2 > 0.0) || !c1.is_finite() || !c2.is_finite() {
        return Err(Error::InvalidParameter(format!("scale factors must be positive, got {c1}, {c2}")));
    }
    Ok(compose(k, &KStarFn::identity(), 1.0 / c1, c1 * c2).with_offset(k.n_offset))
}

/// `v ↦ K*(v/2)`.
pub fn adjoint_transform(k: &KStarFn) -> KStarFn {
    compose(k, &KStarFn::identity(), 0.5, 1.0).with_offset(k.n_offset)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompositionMode {
    /// `2 K₁*(K₂*(½ K₀*(v/4)))`.
    #[serde(rename = "full")]
    Full,
    /// `2 K₂*(K₁*(½ K₀*(v/4)))`.
    #[serde(rename = "full_reversed")]
    FullReversed,
    /// `2 K₁*(K₂*(γ v/4))` for `K₀* = γ v`.
    #[serde(rename = "strong")]
    Strong,
    /// `2 K₁*(K₂*(γ v/2))`, the strong form without the adjoint halving.
    #[serde(rename = "strong_spi")]
    StrongSpi,
    /// `K₂*(½ K₀*(v))`, read at `n - 1`.
    #[serde(rename = "marginal_2mg")]
    Marginal2mg,
    /// `2 K₂*(½ K₀*(v/4))`.
    #[serde(rename = "joint_2mg")]
    Joint2mg,
}

impl CompositionMode {
    pub const ALL: [CompositionMode; 6] = [
        CompositionMode::Full,
        CompositionMode::FullReversed,
        CompositionMode::Strong,
        CompositionMode::StrongSpi,
        CompositionMode::Marginal2mg,
        CompositionMode::Joint2mg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompositionMode::Full => "full",
            CompositionMode::FullReversed => "full_reversed",
            CompositionMode::Strong => "strong",
            CompositionMode::StrongSpi => "strong_spi",
            CompositionMode::Marginal2mg => "marginal_2mg",
            CompositionMode::Joint2mg => "joint_2mg",
        }
    }
}

impl fmt::Display for CompositionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CompositionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CompositionMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidMode(format!("unknown composition mode '{s}'")))
    }
}

/// Composes component K* functions for deterministic-scan Metropolis-within-Gibbs.
///
/// `k0` belongs to the exact Gibbs sampler, `k1` and `k2` to the two conditional kernels.
/// Modes that do not use `k1` ignore it.
pub fn compose_mwg(k0: &KStarFn, k1: &KStarFn, k2: &KStarFn, mode: CompositionMode) -> Result<KStarFn> {
    let g0 = k0.subunit_guard();
    let g1 = k1.subunit_guard();
    let g2 = k2.subunit_guard();
    let id = KStarFn::identity();
    let out = match mode {
        CompositionMode::Full | CompositionMode::FullReversed => {
            let (first, second) = if mode == CompositionMode::Full { (&g1, &g2) } else { (&g2, &g1) };
            let a = compose(&g0, &id, 0.25, 0.5);
            let b = compose(second, &a, 1.0, 1.0);
            compose(first, &b, 1.0, 2.0)
        }
        CompositionMode::Strong | CompositionMode::StrongSpi => {
            let gamma = g0.as_linear().ok_or_else(|| {
                Error::InvalidMode(format!("{mode} composition needs a linear k0, got {}", k0.describe()))
            })?;
            let factor = if mode == CompositionMode::Strong { 0.25 } else { 0.5 };
            let a = KStarFn::linear(gamma * factor)?;
            let b = compose(&g2, &a, 1.0, 1.0);
            compose(&g1, &b, 1.0, 2.0)
        }
        CompositionMode::Marginal2mg => {
            let a = compose(&g0, &id, 1.0, 0.5);
            compose(&g2, &a, 1.0, 1.0).with_offset(1)
        }
        CompositionMode::Joint2mg => {
            let a = compose(&g0, &id, 0.25, 0.5);
            compose(&g2, &a, 1.0, 2.0)
        }
    };
    Ok(out)
}

/// Config-level description of a K*, resolved by [`KStarSpec::build`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KStarSpec {
    Linear {
        slope: f64,
    },
    Power {
        coefficient: f64,
        exponent: f64,
    },
    Conjugate {
        beta: BetaSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v_grid: Option<Vec<f64>>,
    },
    Composite {
        mode: CompositionMode,
        k0: Box<KStarInput>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k1: Option<Box<KStarInput>>,
        k2: Box<KStarInput>,
    },
    Chain {
        first: Box<KStarInput>,
        second: Box<KStarInput>,
    },
    Scale {
        k: Box<KStarInput>,
        c1: f64,
        c2: f64,
    },
    Adjoint {
        k: Box<KStarInput>,
    },
}

/// A K* description or a β to be conjugated on the default grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KStarInput {
    KStar(KStarSpec),
    Beta(BetaSpec),
    /// β shorthand such as `indicator:0.2`.
    Shorthand(String),
}

impl KStarInput {
    pub fn build(&self) -> Result<KStarFn> {
        match self {
            KStarInput::KStar(k) => k.build(),
            KStarInput::Beta(b) => conjugate(b, &default_v_grid()),
            KStarInput::Shorthand(s) => conjugate(&s.parse()?, &default_v_grid()),
        }
    }
}

impl KStarSpec {
    pub fn build(&self) -> Result<KStarFn> {
        match self {
            KStarSpec::Linear { slope } => KStarFn::linear(*slope),
            KStarSpec::Power { coefficient, exponent } => KStarFn::power(*coefficient, *exponent),
            KStarSpec::Conjugate { beta, v_grid } => {
                conjugate(beta, v_grid.as_deref().unwrap_or(&default_v_grid()))
            }
            KStarSpec::Composite { mode, k0, k1, k2 } => {
                let k1 = match k1 {
                    Some(k) => k.build()?,
                    None => KStarFn::identity(),
                };
                compose_mwg(&k0.build()?, &k1, &k2.build()?, *mode)
            }
            KStarSpec::Chain { first, second } => chain(first.build()?, second.build()?),
            KStarSpec::Scale { k, c1, c2 } => scale(&k.build()?, *c1, *c2),
            KStarSpec::Adjoint { k } => Ok(adjoint_transform(&k.build()?)),
        }
    }
}
