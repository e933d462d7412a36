//! Run configuration: a JSON file whose every field is optional, overridden by flags.

use anyhow::{bail, Context, Result};
use mwg_bounds::case_bounds::bayes::synthetic_regression;
use mwg_bounds::case_bounds::ou::synthetic_ou;
use mwg_bounds::case_bounds::{BayesParams, NigParams, OuParams, StepSize};
use mwg_bounds::finite::ComponentMode;
use mwg_bounds::samplers::{BayesMode, NigMode, DEFAULT_OU_BURN_IN};
use mwg_bounds::wpi::{CompositionMode, KStarInput};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Nig,
    Bayes,
    Ou,
    Finite,
    Custom,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Nig => "nig",
            Case::Bayes => "bayes",
            Case::Ou => "ou",
            Case::Finite => "finite",
            Case::Custom => "custom",
        }
    }
}

/// `[0, 1, ...]` or `{"max": N, "step": S}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NGrid {
    List(Vec<u64>),
    Range {
        max: u64,
        #[serde(default = "one")]
        step: u64,
    },
}

fn one() -> u64 {
    1
}

impl NGrid {
    pub fn points(&self) -> Result<Vec<u64>> {
        let mut v = match self {
            NGrid::List(v) => v.clone(),
            NGrid::Range { max, step } => {
                if *step == 0 {
                    bail!("n grid step must be positive");
                }
                (0..=*max).step_by(*step as usize).collect()
            }
        };
        if v.is_empty() {
            bail!("n grid is empty");
        }
        v.sort_unstable();
        v.dedup();
        Ok(v)
    }

    /// `A..B`, `A..B:STEP` or a comma-separated list.
    pub fn parse(s: &str) -> Result<Self> {
        if let Some((a, rest)) = s.split_once("..") {
            let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
            let (a, b, step): (u64, u64, u64) = (
                a.trim().parse().context("grid start")?,
                b.trim().parse().context("grid end")?,
                step.trim().parse().context("grid step")?,
            );
            if step == 0 || b < a {
                bail!("invalid n range '{s}'");
            }
            return Ok(NGrid::List((a..=b).step_by(step as usize).collect()));
        }
        let v = s
            .split(',')
            .map(|p| p.trim().parse::<u64>().with_context(|| format!("invalid n value '{p}'")))
            .collect::<Result<Vec<_>>>()?;
        Ok(NGrid::List(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NigModeName {
    ExactGibbs,
    #[serde(alias = "mwg_scaled")]
    Scaled,
    #[serde(alias = "mwg_fixed")]
    Fixed,
}

impl NigModeName {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "exact_gibbs" => NigModeName::ExactGibbs,
            "scaled" | "mwg_scaled" => NigModeName::Scaled,
            "fixed" | "mwg_fixed" => NigModeName::Fixed,
            _ => bail!("unknown nig mode '{s}' (expected exact_gibbs, mwg_scaled or mwg_fixed)"),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NigConfig {
    pub beta_hyper: f64,
    pub mode: NigModeName,
    /// Common fixed step size for both updates in `fixed` mode.
    pub sigma0: f64,
    pub gamma_dg: f64,
}

impl Default for NigConfig {
    fn default() -> Self {
        NigConfig { beta_hyper: 4.0, mode: NigModeName::Scaled, sigma0: 1.0, gamma_dg: 0.5 }
    }
}

impl NigConfig {
    pub fn params(&self) -> NigParams {
        let step = match self.mode {
            NigModeName::Fixed => StepSize::Fixed(self.sigma0),
            _ => StepSize::SCALED,
        };
        NigParams { beta_hyper: self.beta_hyper, sigma_xi: step, sigma_tau: step, gamma_dg: self.gamma_dg }
    }

    pub fn sampler_mode(&self) -> NigMode {
        match self.mode {
            NigModeName::ExactGibbs => NigMode::ExactGibbs,
            NigModeName::Scaled => NigMode::MwgScaled,
            NigModeName::Fixed => NigMode::MwgFixed { sigma0: self.sigma0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionData {
    Inline { x: Vec<Vec<f64>>, y: Vec<f64> },
    Synthetic { n: usize, p: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesConfig {
    pub a: f64,
    pub b: f64,
    pub sigma0: f64,
    pub gamma_dg: f64,
    pub sampler: BayesMode,
    pub data: RegressionData,
}

impl Default for BayesConfig {
    fn default() -> Self {
        BayesConfig {
            a: 2.0,
            b: 1.0,
            sigma0: 0.5,
            gamma_dg: 0.5,
            sampler: BayesMode::Rwm,
            data: RegressionData::Synthetic { n: 50, p: 2, seed: 1 },
        }
    }
}

impl BayesConfig {
    pub fn params(&self) -> BayesParams {
        let (x, y) = match &self.data {
            RegressionData::Inline { x, y } => (x.clone(), y.clone()),
            RegressionData::Synthetic { n, p, seed } => synthetic_regression(*n, *p, *seed),
        };
        BayesParams { a: self.a, b: self.b, x, y, sigma0: self.sigma0, gamma_dg: self.gamma_dg }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionData {
    Inline { times: Vec<f64>, obs: Vec<f64> },
    Synthetic { theta: f64, n_obs: usize, dt: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuConfig {
    pub mu0: f64,
    pub tau0: f64,
    pub gamma_dg: f64,
    pub delta: f64,
    pub m_grid: usize,
    pub burn_in: usize,
    pub data: DiffusionData,
}

impl Default for OuConfig {
    fn default() -> Self {
        OuConfig {
            mu0: 0.5,
            tau0: 0.7,
            gamma_dg: 0.3,
            delta: 1.5,
            m_grid: 64,
            burn_in: DEFAULT_OU_BURN_IN,
            data: DiffusionData::Synthetic { theta: 1.0, n_obs: 6, dt: 1.0, seed: 3 },
        }
    }
}

impl OuConfig {
    pub fn params(&self) -> OuParams {
        let (times, obs) = match &self.data {
            DiffusionData::Inline { times, obs } => (times.clone(), obs.clone()),
            DiffusionData::Synthetic { theta, n_obs, dt, seed } => synthetic_ou(*theta, *n_obs, *dt, *seed),
        };
        OuParams { mu0: self.mu0, tau0: self.tau0, times, obs, m_grid: self.m_grid, gamma_dg: self.gamma_dg }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteConfig {
    pub nx: usize,
    pub ny: usize,
    /// Seed of the random target; the run seed drives everything else.
    pub model_seed: u64,
    pub component_mode: ComponentMode,
    /// Explicit joint pmf and slice kernels instead of a random lazy-RWM model.
    pub fixture: Option<PathBuf>,
}

impl Default for FiniteConfig {
    fn default() -> Self {
        FiniteConfig { nx: 3, ny: 3, model_seed: 0, component_mode: ComponentMode::WorstSlice, fixture: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomConfig {
    /// A full K* description, or components composed with `mode`.
    pub kstar: Option<KStarInput>,
    pub k0: Option<KStarInput>,
    pub k1: Option<KStarInput>,
    pub k2: Option<KStarInput>,
    pub mode: CompositionMode,
}

impl Default for CustomConfig {
    fn default() -> Self {
        CustomConfig { kstar: None, k0: None, k1: None, k2: None, mode: CompositionMode::Full }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub chains: usize,
    pub steps: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { chains: 4, steps: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Test function such as `tanh:xi`; each case has a default.
    pub test_fn: Option<String>,
    pub starts: usize,
    pub bootstrap: usize,
    /// Replace the sampler by the identity kernel.
    pub frozen: bool,
    /// Separate grid for the estimator; reconciled with `n_grid` by keeping the coarser one.
    pub empirical_grid: Option<NGrid>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { test_fn: None, starts: 2000, bootstrap: 200, frozen: false, empirical_grid: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub models: usize,
    pub trials: usize,
    /// Fixed `nx × ny`; random blocks of size 2–6 otherwise.
    pub states: Option<(usize, usize)>,
    pub n_max: usize,
    pub tolerance: f64,
    pub component_mode: ComponentMode,
    pub tensor_pairs: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            models: 50,
            trials: 20,
            states: None,
            n_max: 200,
            tolerance: mwg_bounds::finite::DEFAULT_TOLERANCE,
            component_mode: ComponentMode::WorstSlice,
            tensor_pairs: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: Case,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub parallelism: usize,
    pub output: Option<PathBuf>,
    pub n_grid: NGrid,
    pub quadrature_nodes: usize,
    pub x_min: f64,
    /// Replace `gamma_dg` by a binned finite-state estimate from exact stationary draws.
    pub estimate_gamma: bool,
    pub nig: NigConfig,
    pub bayes: BayesConfig,
    pub ou: OuConfig,
    pub finite: FiniteConfig,
    pub custom: CustomConfig,
    pub sample: SampleConfig,
    pub compare: CompareConfig,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: Case::Nig,
            seed: 0,
            parallelism: 0,
            output: None,
            n_grid: NGrid::Range { max: 200, step: 1 },
            quadrature_nodes: mwg_bounds::wpi::DEFAULT_QUADRATURE_NODES,
            x_min: mwg_bounds::wpi::DEFAULT_X_MIN,
            estimate_gamma: false,
            nig: NigConfig::default(),
            bayes: BayesConfig::default(),
            ou: OuConfig::default(),
            finite: FiniteConfig::default(),
            custom: CustomConfig::default(),
            sample: SampleConfig::default(),
            compare: CompareConfig::default(),
            verify: VerifySection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// A β shorthand, or inline JSON for any β or K* description.
pub fn parse_kstar_input(s: &str) -> Result<KStarInput> {
    let t = s.trim();
    if t.starts_with('{') {
        return serde_json::from_str(t).with_context(|| format!("parsing K*/β description {t}"));
    }
    Ok(KStarInput::Beta(t.parse()?))
}

/// `NxM`.
pub fn parse_states(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(['x', 'X']).with_context(|| format!("expected NxM, got '{s}'"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(NGrid::parse("0..4").unwrap().points().unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(NGrid::parse("0..10:5").unwrap().points().unwrap(), vec![0, 5, 10]);
        assert_eq!(NGrid::parse("5,1,1").unwrap().points().unwrap(), vec![1, 5]);
        assert!(NGrid::parse("4..1").is_err());
        assert!(NGrid::parse("a").is_err());
    }

    #[test]
    fn empty_config_is_default() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn kstar_inputs() {
        assert!(matches!(parse_kstar_input("indicator:0.2").unwrap(), KStarInput::Beta(_)));
        assert!(matches!(parse_kstar_input(r#"{"family":"linear","slope":0.1}"#).unwrap(), KStarInput::KStar(_)));
        assert!(parse_kstar_input("nonsense").is_err());
        assert_eq!(parse_states("2x3").unwrap(), (2, 3));
    }
}
