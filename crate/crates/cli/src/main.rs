//! `mwg-bounds`: explicit convergence bounds for Metropolis-within-Gibbs samplers.

mod commands;
mod config;
mod output;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use commands::Outcome;
use config::{parse_kstar_input, parse_states, Case, NGrid, NigModeName, RunConfig};
use mwg_bounds::finite::ComponentMode;
use mwg_bounds::samplers::BayesMode;
use mwg_bounds::wpi::CompositionMode;
use std::path::PathBuf;
use std::process::ExitCode;

const OUT_ENV: &str = "MWG_BOUNDS_OUT";

#[derive(Parser, Debug)]
#[command(name = "mwg-bounds", version, about = "Explicit L2 convergence bounds for Metropolis-within-Gibbs samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: config `output`, then $MWG_BOUNDS_OUT, then ./mwg-bounds-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true, value_enum)]
    case: Option<Case>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the explicit rate bound on an n grid.
    Bound(BoundArgs),
    /// Run the finite-state identity and domination suite.
    Verify(VerifyArgs),
    /// Write sampler traces.
    Sample(SampleArgs),
    /// Overlay the bound with a paired-chain L2 decay estimate.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Default)]
struct CaseArgs {
    /// nig: exact_gibbs | mwg_scaled | mwg_fixed; bayes: rwm | exact.
    #[arg(long)]
    mode: Option<String>,
    /// Data-generating spectral gap (gamma of the underlying Gibbs chain).
    #[arg(long)]
    gamma: Option<f64>,
    /// Estimate gamma from a binned finite-state proxy of the exact Gibbs target (nig, bayes).
    #[arg(long, conflicts_with = "gamma")]
    estimate_gamma: bool,
    #[arg(long)]
    sigma0: Option<f64>,
    /// NIG prior rate beta.
    #[arg(long)]
    beta_hyper: Option<f64>,
    /// OU window exponent.
    #[arg(long)]
    delta: Option<f64>,
    /// OU grid points per segment.
    #[arg(long)]
    segments_grid: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Finite state space size, NxM.
    #[arg(long)]
    states: Option<String>,
    #[arg(long)]
    model_seed: Option<u64>,
    #[arg(long, value_enum)]
    component_mode: Option<ComponentModeArg>,
    /// Finite model fixture (JSON).
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Custom case: beta shorthand such as indicator:0.2 or power_law:1:0.5.
    #[arg(long)]
    beta: Option<String>,
    /// Custom case: K* as JSON or beta shorthand.
    #[arg(long)]
    kstar: Option<String>,
    #[arg(long)]
    k0: Option<String>,
    #[arg(long)]
    k1: Option<String>,
    #[arg(long)]
    k2: Option<String>,
    #[arg(long, value_enum)]
    composition: Option<CompositionArg>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
#[value(rename_all = "snake_case")]
enum ComponentModeArg {
    WorstSlice,
    Mixture,
}

impl From<ComponentModeArg> for ComponentMode {
    fn from(a: ComponentModeArg) -> Self {
        match a {
            ComponentModeArg::WorstSlice => ComponentMode::WorstSlice,
            ComponentModeArg::Mixture => ComponentMode::Mixture,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
#[value(rename_all = "snake_case")]
enum CompositionArg {
    Full,
    FullReversed,
    Strong,
    StrongSpi,
    #[value(name = "marginal_2mg")]
    Marginal2mg,
    #[value(name = "joint_2mg")]
    Joint2mg,
}

impl From<CompositionArg> for CompositionMode {
    fn from(a: CompositionArg) -> Self {
        match a {
            CompositionArg::Full => CompositionMode::Full,
            CompositionArg::FullReversed => CompositionMode::FullReversed,
            CompositionArg::Strong => CompositionMode::Strong,
            CompositionArg::StrongSpi => CompositionMode::StrongSpi,
            CompositionArg::Marginal2mg => CompositionMode::Marginal2mg,
            CompositionArg::Joint2mg => CompositionMode::Joint2mg,
        }
    }
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Grid: `A..B`, `A..B:STEP` or `n1,n2,...`.
    #[arg(long)]
    n: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    models: Option<usize>,
    /// Test functions per model.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    states: Option<String>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    component_mode: Option<ComponentModeArg>,
    #[arg(long)]
    tensor_pairs: Option<usize>,
    #[arg(long)]
    fixture: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long)]
    n: Option<String>,
    /// Separate estimator grid; the coarser of the two is used.
    #[arg(long)]
    empirical_n: Option<String>,
    /// `tanh:NAME[:SCALE:SHIFT]` or `band:NAME:LO:HI:WIDTH`.
    #[arg(long)]
    test_fn: Option<String>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Replace the sampler by the identity kernel (sanity check).
    #[arg(long)]
    frozen: bool,
}

fn apply_case(cfg: &mut RunConfig, a: &CaseArgs, explicit_case: bool) -> Result<()> {
    let custom_given = a.beta.is_some() || a.kstar.is_some() || a.k0.is_some() || a.k2.is_some();
    if custom_given && !explicit_case {
        cfg.case = Case::Custom;
    }
    if let Some(m) = &a.mode {
        match cfg.case {
            Case::Bayes => {
                cfg.bayes.sampler = match m.as_str() {
                    "rwm" => BayesMode::Rwm,
                    "exact" | "exact_gibbs" => BayesMode::Exact,
                    _ => anyhow::bail!("unknown bayes mode '{m}' (expected rwm or exact)"),
                }
            }
            _ => cfg.nig.mode = NigModeName::parse(m)?,
        }
    }
    if a.estimate_gamma {
        cfg.estimate_gamma = true;
    }
    if let Some(g) = a.gamma {
        cfg.nig.gamma_dg = g;
        cfg.bayes.gamma_dg = g;
        cfg.ou.gamma_dg = g;
    }
    if let Some(s) = a.sigma0 {
        cfg.nig.sigma0 = s;
        cfg.bayes.sigma0 = s;
    }
    if let Some(b) = a.beta_hyper {
        cfg.nig.beta_hyper = b;
    }
    if let Some(d) = a.delta {
        cfg.ou.delta = d;
    }
    if let Some(m) = a.segments_grid {
        cfg.ou.m_grid = m;
    }
    if let Some(b) = a.burn_in {
        cfg.ou.burn_in = b;
    }
    if let Some(s) = &a.states {
        (cfg.finite.nx, cfg.finite.ny) = parse_states(s)?;
    }
    if let Some(s) = a.model_seed {
        cfg.finite.model_seed = s;
    }
    if let Some(c) = a.component_mode {
        cfg.finite.component_mode = c.into();
    }
    if let Some(f) = &a.fixture {
        cfg.finite.fixture = Some(f.clone());
    }
    let parse = |s: &Option<String>| s.as_deref().map(parse_kstar_input).transpose();
    if let Some(k) = parse(&a.kstar)?.or(parse(&a.beta)?) {
        cfg.custom.kstar = Some(k);
    }
    if let Some(k) = parse(&a.k0)? {
        cfg.custom.k0 = Some(k);
    }
    if let Some(k) = parse(&a.k1)? {
        cfg.custom.k1 = Some(k);
    }
    if let Some(k) = parse(&a.k2)? {
        cfg.custom.k2 = Some(k);
    }
    if let Some(c) = a.composition {
        cfg.custom.mode = c.into();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    if let Some(c) = cli.case {
        cfg.case = c;
    }
    let explicit_case = cli.case.is_some() || cli.config.is_some();
    match &cli.command {
        Command::Bound(a) => {
            apply_case(&mut cfg, &a.case, explicit_case)?;
            if let Some(n) = &a.n {
                cfg.n_grid = NGrid::parse(n)?;
            }
        }
        Command::Verify(a) => {
            let v = &mut cfg.verify;
            v.models = a.models.unwrap_or(v.models);
            v.trials = a.trials.unwrap_or(v.trials);
            v.n_max = a.n_max.unwrap_or(v.n_max);
            v.tolerance = a.tol.unwrap_or(v.tolerance);
            v.tensor_pairs = a.tensor_pairs.unwrap_or(v.tensor_pairs);
            if let Some(s) = &a.states {
                v.states = Some(parse_states(s)?);
            }
            if let Some(c) = a.component_mode {
                v.component_mode = c.into();
            }
            if let Some(f) = &a.fixture {
                cfg.finite.fixture = Some(f.clone());
            }
        }
        Command::Sample(a) => {
            apply_case(&mut cfg, &a.case, explicit_case)?;
            cfg.sample.chains = a.chains.unwrap_or(cfg.sample.chains);
            cfg.sample.steps = a.steps.unwrap_or(cfg.sample.steps);
        }
        Command::Compare(a) => {
            apply_case(&mut cfg, &a.case, explicit_case)?;
            if let Some(n) = &a.n {
                cfg.n_grid = NGrid::parse(n)?;
            }
            if let Some(n) = &a.empirical_n {
                cfg.compare.empirical_grid = Some(NGrid::parse(n)?);
            }
            if a.test_fn.is_some() {
                cfg.compare.test_fn = a.test_fn.clone();
            }
            cfg.compare.starts = a.starts.unwrap_or(cfg.compare.starts);
            cfg.compare.bootstrap = a.bootstrap.unwrap_or(cfg.compare.bootstrap);
            cfg.compare.frozen |= a.frozen;
        }
    }
    if cfg.parallelism > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(output::DEFAULT_OUT_DIR));
    let out = output::prepare_dir(&out)?;
    match cli.command {
        Command::Bound(_) => commands::cmd_bound(&cfg, &out),
        Command::Verify(_) => commands::cmd_verify(&cfg, &out),
        Command::Sample(_) => commands::cmd_sample(&cfg, &out),
        Command::Compare(_) => commands::cmd_compare(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
