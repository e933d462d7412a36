use super::kernel::{
    adjoint, dirichlet_form_values, l2_decay_exact, spectral_gap, weighted_dot, FiniteKernel, GapMode, TestFunction,
};
use super::model::{random_reversible_kernel, tensor_product, FiniteJointModel, SliceKind};
use crate::error::{Error, Result};
use crate::wpi::{compose_mwg, conjugate, default_v_grid, tensorize, BetaSpec, CompositionMode, KStarFn, RateBound};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DOMINATION_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Largest deviation for identities; largest violation (0 if none) for inequalities.
    pub worst_residual: f64,
    /// Seed of the model that produced the worst residual.
    pub seed: Option<u64>,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn record(&mut self, name: &str, residual: f64, tol: f64, seed: Option<u64>) {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(c) => {
                if residual > c.worst_residual {
                    c.worst_residual = residual;
                    c.seed = seed;
                }
                c.passed &= residual <= tol;
            }
            None => self.checks.push(CheckResult {
                name: name.to_string(),
                worst_residual: residual,
                seed,
                passed: residual <= tol,
            }),
        }
    }

    /// Keeps the worst residual per check name.
    pub fn merge(&mut self, other: VerificationReport) {
        for c in other.checks {
            match self.checks.iter_mut().find(|d| d.name == c.name) {
                Some(d) => {
                    if c.worst_residual > d.worst_residual {
                        d.worst_residual = c.worst_residual;
                        d.seed = c.seed;
                    }
                    d.passed &= c.passed;
                }
                None => self.checks.push(c),
            }
        }
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let seed = c.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
            writeln!(
                f,
                "{:<24} worst_residual={:<12.3e} seed={:<8} {}",
                c.name,
                c.worst_residual,
                seed,
                if c.passed { "PASS" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn energy(k: &FiniteKernel, f: &DVector<f64>) -> Result<f64> {
    dirichlet_form_values(k, f)
}

fn osc(v: &DVector<f64>) -> f64 {
    v.max() - v.min()
}

fn random_centered<R: Rng>(mu: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    let v = DVector::from_fn(mu.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let m = v.dot(mu);
    v.add_scalar(-m)
}

/// Centered Gaussian test functions on the joint space.
pub fn random_test_functions<R: Rng>(m: &FiniteJointModel, count: usize, rng: &mut R) -> Result<Vec<TestFunction>> {
    (0..count).map(|_| TestFunction::centered(random_centered(m.mu(), rng), m.mu())).collect()
}

/// Every Dirichlet-form identity and comparison inequality on `trials` random test functions.
pub fn verify_identities(m: &FiniteJointModel, trials: usize, tol: f64, seed: u64) -> Result<VerificationReport> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerificationReport::default();
    let s = Some(seed);
    let compositions = [
        (&m.p, &m.g1, &m.g2),
        (&m.p1, &m.h1, &m.g2),
        (&m.p2, &m.g1, &m.h2),
        (&m.p12, &m.h1, &m.h2),
    ];
    struct Prepared {
        star_t: FiniteKernel,
        t_star: FiniteKernel,
        t1_sq: FiniteKernel,
        t2_sq: FiniteKernel,
    }
    let prepared: Vec<Prepared> = compositions
        .iter()
        .map(|(t, t1, t2)| {
            let a = adjoint(t)?;
            Ok(Prepared { star_t: a.then(t)?, t_star: t.then(&a)?, t1_sq: t1.then(t1)?, t2_sq: t2.then(t2)? })
        })
        .collect::<Result<_>>()?;
    let px_star_px = adjoint(&m.px)?.then(&m.px)?;
    let pbar_star_pbar = adjoint(&m.pbar_x)?.then(&m.pbar_x)?;
    let positive_joint: Vec<(&FiniteKernel, FiniteKernel)> =
        [&m.g1, &m.g2, &m.h1, &m.h2].into_iter().map(|k| (k, k.then(k).unwrap())).collect();
    let positive_marginal: Vec<(&FiniteKernel, FiniteKernel)> =
        [&m.px, &m.pbar_x].into_iter().map(|k| (k, k.then(k).unwrap())).collect();
    let all = [&m.g1, &m.g2, &m.h1, &m.h2, &m.p, &m.p1, &m.p2, &m.p12];

    for _ in 0..trials {
        let f = random_centered(m.mu(), &mut rng);
        for ((t, _, t2), pre) in compositions.iter().zip(&prepared) {
            let lhs = energy(&pre.star_t, &f)?;
            let t2f = t2.apply(&f);
            let rhs = energy(&pre.t2_sq, &f)? + energy(&pre.t1_sq, &t2f)?;
            report.record("decomposition", (lhs - rhs).abs(), tol, s);
            report.record("two_sided_comparison", lhs - 2.0 * energy(t, &f)?, tol, s);
            let tf = t.apply(&f);
            report.record("adjoint_inequality", energy(&pre.t_star, &tf)? - lhs, tol, s);
        }
        for (k, sq) in &positive_joint {
            report.record("positive_square", energy(k, &f)? - energy(sq, &f)?, tol, s);
        }
        for k in all {
            report.record("osc_contraction", osc(&k.apply(&f)) - osc(&f), tol, s);
        }

        let g = random_centered(m.mu_x(), &mut rng);
        for (k, sq) in &positive_marginal {
            report.record("positive_square", energy(k, &g)? - energy(sq, &g)?, tol, s);
        }
        let fg = m.cylinder(&g);
        let pairs = [(&m.p, &px_star_px), (&m.p2, &pbar_star_pbar)];
        for (t, marginal_sq) in pairs {
            let joint = weighted_dot(&fg, &fg, m.mu()) - weighted_dot(&t.apply(&fg), &t.apply(&fg), m.mu());
            report.record("marginal_equality", (joint - energy(marginal_sq, &g)?).abs(), tol, s);
        }

        for (t, marginal) in [(&m.p, &m.px), (&m.p2, &m.pbar_x)] {
            let tf = t.apply(&f);
            let g_f = m.x_part(&tf);
            // Tf must not depend on y
            let flat = (m.cylinder(&g_f) - &tf).amax();
            let lift = (m.cylinder(&marginal.apply(&g_f)) - t.apply(&tf)).amax();
            report.record("lift_identity", flat.max(lift), tol, s);
        }
    }

    for g in [&m.g1, &m.g2] {
        report.record("idempotence", (g.then(g)?.matrix() - g.matrix()).amax(), tol, s);
    }
    for h in [&m.h1, &m.h2, &m.g1, &m.g2] {
        let ev = h.reversible_spectrum()?;
        report.record("positivity", (-ev[ev.len() - 1]).max(0.0), tol, s);
    }
    for k in all {
        let r = (k.matrix().tr_mul(k.mu()) - k.mu()).amax();
        report.record("stationarity", r, tol, s);
    }
    Ok(report)
}

/// Whether component WPIs use the worst slice gap or the exact finite mixture over slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentMode {
    WorstSlice,
    Mixture,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComponentGaps {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

pub fn component_gaps(m: &FiniteJointModel) -> Result<ComponentGaps> {
    Ok(ComponentGaps { gamma0: m.gamma0()?, gamma1: m.gamma1()?, gamma2: m.gamma2()? })
}

/// `K* = 2K₁*(K₂*(½K₀*(v/4)))` from exactly computed component gaps.
pub fn composed_kstar(m: &FiniteJointModel, mode: ComponentMode) -> Result<KStarFn> {
    let gaps = component_gaps(m)?;
    let k0 = KStarFn::linear(gaps.gamma0)?;
    let (k1, k2) = match mode {
        ComponentMode::WorstSlice => (KStarFn::linear(gaps.gamma1)?, KStarFn::linear(gaps.gamma2)?),
        ComponentMode::Mixture => {
            let mix = |gaps: Vec<f64>, weights: Vec<f64>| -> Result<KStarFn> {
                let children = gaps.into_iter().map(|g| BetaSpec::indicator(g.max(f64::MIN_POSITIVE))).collect();
                conjugate(&BetaSpec::mixture(children, weights)?, &default_v_grid())
            };
            let wx: Vec<f64> = m.mu_x().iter().copied().collect();
            let wy: Vec<f64> = (0..m.ny).map(|y| m.pi.column(y).sum()).collect();
            (mix(m.slice_gaps_h1()?, wx)?, mix(m.slice_gaps_h2()?, wy)?)
        }
    };
    compose_mwg(&k0, &k1, &k2, CompositionMode::Full)
}

/// Exact `‖P₁₂ⁿ f‖² / ‖f‖²_osc ≤ F⁻¹(n)` for every `f` and `n ≤ n_max`.
pub fn verify_bound_domination(
    m: &FiniteJointModel,
    composed: &RateBound,
    f_set: &[TestFunction],
    n_max: usize,
) -> Result<VerificationReport> {
    domination_report(&m.p12, composed, f_set, n_max, "bound_domination")
}

fn domination_report(
    t: &FiniteKernel,
    composed: &RateBound,
    f_set: &[TestFunction],
    n_max: usize,
    name: &str,
) -> Result<VerificationReport> {
    let bounds: Vec<f64> = (0..=n_max).map(|n| composed.bound(n as f64).value).collect();
    let mut report = VerificationReport::default();
    for f in f_set {
        let decay = l2_decay_exact(t, f, n_max)?;
        let scale = f.osc * f.osc;
        let worst = decay
            .iter()
            .zip(&bounds)
            .map(|(d, b)| d / scale - b)
            .fold(f64::NEG_INFINITY, f64::max);
        report.record(name, worst.max(0.0), DOMINATION_SLACK, None);
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub models: usize,
    pub functions: usize,
    /// Fixed block sizes; otherwise drawn uniformly from `block_range`.
    pub states: Option<(usize, usize)>,
    pub block_range: (usize, usize),
    pub n_max: usize,
    pub tolerance: f64,
    pub component_mode: ComponentMode,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            models: 50,
            functions: 20,
            states: None,
            block_range: (2, 6),
            n_max: 200,
            tolerance: DEFAULT_TOLERANCE,
            component_mode: ComponentMode::WorstSlice,
            seed: 0,
        }
    }
}

fn model_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Identity suite plus bound domination on `models` random lazy-RWM models, in parallel.
pub fn run_verification(cfg: &VerifyConfig) -> Result<VerificationReport> {
    if cfg.models == 0 || cfg.functions == 0 {
        return Err(Error::Precondition("need at least one model and one test function".into()));
    }
    let (lo, hi) = cfg.block_range;
    if lo == 0 || hi < lo {
        return Err(Error::InvalidParameter(format!("invalid block range {lo}..={hi}")));
    }
    let reports: Vec<Result<VerificationReport>> = (0..cfg.models)
        .into_par_iter()
        .map(|i| {
            let mut rng = model_rng(cfg.seed, i);
            let (nx, ny) = cfg.states.unwrap_or_else(|| (rng.random_range(lo..=hi), rng.random_range(lo..=hi)));
            let m = FiniteJointModel::random(nx, ny, SliceKind::LazyRwm, &mut rng)?;
            let model_seed = cfg.seed.wrapping_add(i as u64);
            let mut report = verify_identities(&m, cfg.functions, cfg.tolerance, model_seed)?;
            let rb = RateBound::with_defaults(composed_kstar(&m, cfg.component_mode)?)?;
            let fs = random_test_functions(&m, cfg.functions, &mut rng)?;
            let mut dom = verify_bound_domination(&m, &rb, &fs, cfg.n_max)?;
            for c in &mut dom.checks {
                c.seed = Some(model_seed);
            }
            report.merge(dom);
            Ok(report)
        })
        .collect();
    let mut total = VerificationReport::default();
    for r in reports {
        total.merge(r?);
    }
    Ok(total)
}

/// `gap(A ⊗ B) ≥ min(gap A, gap B)` and domination of the product decay by the summed WPI.
pub fn verify_tensorization(pairs: usize, functions: usize, n_max: usize, seed: u64) -> Result<VerificationReport> {
    let reports: Vec<Result<VerificationReport>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = model_rng(seed ^ 0x7e45_0a11, i);
            let (na, nb) = (rng.random_range(2..=6usize), rng.random_range(2..=6usize));
            let a = random_reversible_kernel(na, &mut rng)?;
            let b = random_reversible_kernel(nb, &mut rng)?;
            let ab = tensor_product(&a, &b)?;
            let (ga, gb) = (spectral_gap(&a, GapMode::Reversible)?, spectral_gap(&b, GapMode::Reversible)?);
            let gab = spectral_gap(&ab, GapMode::Reversible)?;
            let mut report = VerificationReport::default();
            let pair_seed = Some(seed.wrapping_add(i as u64));
            report.record("tensor_gap", ga.min(gb) - gab, 1e-10, pair_seed);
            // T*T = T² for the reversible factors
            let sq = |g: f64| 1.0 - (1.0 - g) * (1.0 - g);
            let beta = tensorize(vec![BetaSpec::indicator(sq(ga)), BetaSpec::indicator(sq(gb))])?;
            let rb = RateBound::with_defaults(conjugate(&beta, &default_v_grid())?)?;
            let fs: Vec<TestFunction> = (0..functions)
                .map(|_| TestFunction::centered(random_centered(ab.mu(), &mut rng), ab.mu()))
                .collect::<Result<_>>()?;
            let mut dom = domination_report(&ab, &rb, &fs, n_max, "tensor_domination")?;
            for c in &mut dom.checks {
                c.seed = pair_seed;
            }
            report.merge(dom);
            Ok(report)
        })
        .collect();
    let mut total = VerificationReport::default();
    for r in reports {
        total.merge(r?);
    }
    Ok(total)
}
