use crate::config::{Case, NGrid, NigModeName, RunConfig};
use crate::output::{num, write_csv, write_json};
use anyhow::{bail, Context, Result};
use mwg_bounds::case_bounds::{bayes_rate, nig_fixed_rate, nig_scaled_rate, ou_rate_summary};
use mwg_bounds::finite::{
    component_gaps, composed_kstar, random_test_functions, run_verification, verify_bound_domination,
    verify_identities, verify_tensorization, FiniteFixture, FiniteJointModel, SliceKind,
    VerifyConfig,
};
use mwg_bounds::samplers::{
    chain_rng, estimate_gibbs_gap, estimate_l2_decay, run_chain, BayesSampler, DecayConfig, FiniteChainSampler, FiniteScan, Frozen,
    BayesMode, NigMode, NigSampler, OuSampler, Sampler, TestFn,
};
use mwg_bounds::wpi::{compose_mwg, KStarFn, RateBound, RateOptions};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

pub struct BuiltBound {
    pub rate: RateBound,
    pub case_metadata: Value,
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        other => Map::from_iter([("value".to_string(), other)]),
    }
}

pub fn finite_model(cfg: &RunConfig) -> Result<FiniteJointModel> {
    if let Some(path) = &cfg.finite.fixture {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading fixture {}", path.display()))?;
        let fixture: FiniteFixture =
            serde_json::from_str(&text).with_context(|| format!("parsing fixture {}", path.display()))?;
        return Ok(fixture.build()?);
    }
    let mut rng = chain_rng(cfg.finite.model_seed, 0);
    Ok(FiniteJointModel::random(cfg.finite.nx, cfg.finite.ny, SliceKind::LazyRwm, &mut rng)?)
}

const PROXY_BINS: (usize, usize) = (8, 8);
const PROXY_SAMPLES: usize = 100_000;

/// Swaps `gamma_dg` for the finite proxy computed from the exact Gibbs target.
fn estimate_gamma(cfg: &RunConfig) -> Result<(RunConfig, Value)> {
    let mut cfg = cfg.clone();
    let proxy = match cfg.case {
        Case::Nig => {
            let s = NigSampler::new(cfg.nig.beta_hyper, NigMode::ExactGibbs)?;
            let p = estimate_gibbs_gap(&s, (0, 1), PROXY_BINS, PROXY_SAMPLES, cfg.seed)?;
            cfg.nig.gamma_dg = p.gamma;
            p
        }
        Case::Bayes => {
            let s = BayesSampler::new(cfg.bayes.params(), BayesMode::Exact)?;
            let p = estimate_gibbs_gap(&s, (0, 1), PROXY_BINS, PROXY_SAMPLES, cfg.seed)?;
            cfg.bayes.gamma_dg = p.gamma;
            p
        }
        other => bail!("estimate_gamma is available for the nig and bayes cases, not {}", other.name()),
    };
    let meta = json!({
        "source": format!("finite_proxy({}x{})", proxy.bins.0, proxy.bins.1),
        "proxy": proxy,
    });
    Ok((cfg, meta))
}

pub fn build_bound(cfg: &RunConfig) -> Result<BuiltBound> {
    if cfg.estimate_gamma {
        let (cfg, gamma_meta) = estimate_gamma(cfg)?;
        let mut built = build_bound_with(&cfg)?;
        if let Value::Object(m) = &mut built.case_metadata {
            m.insert("gamma_estimate".into(), gamma_meta);
        }
        return Ok(built);
    }
    build_bound_with(cfg)
}

fn build_bound_with(cfg: &RunConfig) -> Result<BuiltBound> {
    let (kstar, meta): (KStarFn, Value) = match cfg.case {
        Case::Nig => match cfg.nig.mode {
            NigModeName::Scaled => {
                let r = nig_scaled_rate(&cfg.nig.params())?;
                let meta = json!({
                    "gamma_xi": r.gamma_xi,
                    "gamma_tau": r.gamma_tau,
                    "gamma_dg": r.gamma_dg,
                    "kappa": r.kappa,
                    "rate_shape": "0.25*exp(-gamma_tau*gamma_xi*gamma*n)",
                });
                (r.kstar, meta)
            }
            NigModeName::Fixed => {
                let r = nig_fixed_rate(&cfg.nig.params())?;
                let mut meta = object(serde_json::to_value(&r)?);
                let ratio = cfg.nig.beta_hyper / cfg.nig.sigma0;
                meta.insert("rate_shape".into(), json!("c_tilde*n^(-rate_exponent)"));
                meta.insert(
                    "rate_exponent_displayed_formula".into(),
                    json!(if ratio > 1.0 { "1/14" } else { "beta/(4*beta+10*sigma0)" }),
                );
                meta.insert("beta_over_sigma0".into(), json!(ratio));
                (r.kstar, Value::Object(meta))
            }
            NigModeName::ExactGibbs => bail!("bound for the nig case needs mode scaled or fixed"),
        },
        Case::Bayes => {
            let r = bayes_rate(&cfg.bayes.params())?;
            let mut meta = object(serde_json::to_value(&r)?);
            meta.insert("exponent_formula".into(), json!("min(a_prime, b_prime/C2)"));
            meta.insert("rate_shape".into(), json!("(n-1)^(-min(a_prime, b_prime/C2))"));
            (r.kstar, Value::Object(meta))
        }
        Case::Ou => {
            let r = ou_rate_summary(&cfg.ou.params(), cfg.ou.delta)?;
            (r.kstar.clone(), serde_json::to_value(&r)?)
        }
        Case::Finite => {
            let m = finite_model(cfg)?;
            let gaps = component_gaps(&m)?;
            let meta = json!({
                "nx": m.nx,
                "ny": m.ny,
                "gamma0": gaps.gamma0,
                "gamma1": gaps.gamma1,
                "gamma2": gaps.gamma2,
                "component_mode": cfg.finite.component_mode,
                "composition": "full",
            });
            (composed_kstar(&m, cfg.finite.component_mode)?, meta)
        }
        Case::Custom => {
            let c = &cfg.custom;
            let kstar = match (&c.kstar, &c.k0, &c.k2) {
                (Some(k), None, None) => k.build()?,
                (None, Some(k0), Some(k2)) => {
                    let k1 = match &c.k1 {
                        Some(k) => k.build()?,
                        None => KStarFn::identity(),
                    };
                    compose_mwg(&k0.build()?, &k1, &k2.build()?, c.mode)?
                }
                _ => bail!("custom case needs either kstar/beta, or k0 and k2 (with optional k1)"),
            };
            let meta = json!({ "composition": if c.kstar.is_some() { None } else { Some(c.mode) } });
            (kstar, meta)
        }
    };
    let options = RateOptions { quadrature_nodes: cfg.quadrature_nodes, x_min: cfg.x_min };
    let mut case_metadata = object(meta);
    case_metadata.insert("kstar".into(), json!(kstar.describe()));
    case_metadata.insert("n_offset".into(), json!(kstar.n_offset));
    Ok(BuiltBound { rate: RateBound::new(kstar, options)?, case_metadata: Value::Object(case_metadata) })
}

fn base_meta(command: &str, cfg: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("case".into(), json!(cfg.case.name()));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    m
}

pub fn cmd_bound(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let built = build_bound(cfg)?;
    let grid = cfg.n_grid.points()?;
    let values: Vec<_> = grid.iter().map(|&n| built.rate.bound(n as f64)).collect();
    write_csv(
        &out.join("bound.csv"),
        &["n", "bound"],
        grid.iter().zip(&values).map(|(n, v)| vec![n.to_string(), num(v.value)]),
    )?;
    let saturated: Vec<u64> = grid.iter().zip(&values).filter(|(_, v)| v.saturated).map(|(n, _)| *n).collect();
    let mut meta = base_meta("bound", cfg);
    meta.insert("case_metadata".into(), built.case_metadata.clone());
    meta.insert("floor".into(), json!(built.rate.floor()));
    meta.insert("saturated_n".into(), json!(saturated));
    write_json(&out.join("bound.meta.json"), &meta)?;
    println!("K*(v) = {}", built.case_metadata["kstar"].as_str().unwrap_or(""));
    println!("wrote {} points to {}", grid.len(), out.join("bound.csv").display());
    Ok(Outcome::Pass)
}

pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let v = &cfg.verify;
    if v.trials == 0 || v.models == 0 {
        bail!("verify needs at least one model and one trial");
    }
    let start = std::time::Instant::now();
    let report = if cfg.finite.fixture.is_some() {
        let m = finite_model(cfg)?;
        let mut report = verify_identities(&m, v.trials, v.tolerance, cfg.seed)?;
        let rb = RateBound::with_defaults(composed_kstar(&m, v.component_mode)?)?;
        let fs = random_test_functions(&m, v.trials, &mut chain_rng(cfg.seed, 1))?;
        report.merge(verify_bound_domination(&m, &rb, &fs, v.n_max)?);
        report
    } else {
        let vc = VerifyConfig {
            models: v.models,
            functions: v.trials,
            states: v.states,
            block_range: (2, 6),
            n_max: v.n_max,
            tolerance: v.tolerance,
            component_mode: v.component_mode,
            seed: cfg.seed,
        };
        let mut report = run_verification(&vc)?;
        if v.tensor_pairs > 0 {
            report.merge(verify_tensorization(v.tensor_pairs, v.trials, v.n_max, cfg.seed)?);
        }
        report
    };
    std::fs::write(out.join("verify_report.txt"), format!("{report}\n"))?;
    let mut meta = base_meta("verify", cfg);
    meta.insert("report".into(), serde_json::to_value(&report)?);
    meta.insert("passed".into(), json!(report.passed()));
    write_json(&out.join("verify.meta.json"), &meta)?;
    println!("{report}");
    println!("elapsed: {:.2}s", start.elapsed().as_secs_f64());
    for f in report.failures() {
        eprintln!("failed: {} (worst residual {:e}, seed {:?})", f.name, f.worst_residual, f.seed);
    }
    Ok(if report.passed() { Outcome::Pass } else { Outcome::Fail })
}

fn run_sample<S: Sampler>(s: &S, cfg: &RunConfig, out: &Path, extra: Map<String, Value>) -> Result<Outcome> {
    let (chains, steps) = (cfg.sample.chains, cfg.sample.steps);
    if chains == 0 {
        bail!("need at least one chain");
    }
    let traces: Vec<_> = (0..chains as u64).into_par_iter().map(|c| run_chain(s, cfg.seed, c, steps)).collect();
    let mut header = vec!["step".to_string()];
    header.extend(s.coord_names());
    let mut chain_meta = Vec::with_capacity(chains);
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for (c, t) in traces.iter().enumerate() {
        write_csv(
            &out.join(format!("trace_chain_{c:03}.csv")),
            &header,
            t.rows.iter().enumerate().map(|(i, r)| std::iter::once(i.to_string()).chain(r.iter().map(|v| num(*v))).collect()),
        )?;
        let diag: Map<String, Value> = t.diagnostics.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        for (k, v) in &t.diagnostics {
            *sums.entry(k.clone()).or_default() += v / chains as f64;
        }
        chain_meta.push(json!({ "chain": c, "lineage": t.lineage, "diagnostics": diag }));
    }
    let mut meta = base_meta("sample", cfg);
    meta.insert("sampler".into(), json!(s.describe()));
    meta.insert("chains".into(), json!(chain_meta));
    meta.insert("mean_diagnostics".into(), json!(sums));
    meta.insert("burn_in_discarded".into(), json!(0));
    meta.extend(extra);
    write_json(&out.join("sample.meta.json"), &meta)?;
    println!("{}: {chains} chains x {steps} steps -> {}", s.describe(), out.display());
    for (k, v) in &sums {
        println!("{k:<28} {v:.4}");
    }
    Ok(Outcome::Pass)
}

fn ou_discretization(cfg: &RunConfig) -> Map<String, Value> {
    Map::from_iter([(
        "discretization".to_string(),
        json!({ "m_grid": cfg.ou.m_grid, "ito_sum": "left_point", "time_integral": "trapezoid", "burn_in": cfg.ou.burn_in }),
    )])
}

pub fn cmd_sample(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    match cfg.case {
        Case::Nig => run_sample(&NigSampler::new(cfg.nig.beta_hyper, cfg.nig.sampler_mode())?, cfg, out, Map::new()),
        Case::Bayes => run_sample(&BayesSampler::new(cfg.bayes.params(), cfg.bayes.sampler)?, cfg, out, Map::new()),
        Case::Ou => run_sample(&OuSampler::new(cfg.ou.params(), cfg.ou.burn_in)?, cfg, out, ou_discretization(cfg)),
        Case::Finite => {
            let m = finite_model(cfg)?;
            run_sample(&FiniteChainSampler::from_model(&m, FiniteScan::Mwg)?, cfg, out, Map::new())
        }
        Case::Custom => bail!("the custom case has no sampler; use bound"),
    }
}

/// Chooses the grid with fewer points when the bound and estimator grids differ.
pub fn reconcile_grids(bound: Vec<u64>, empirical: Option<Vec<u64>>) -> (Vec<u64>, Option<String>) {
    match empirical {
        Some(e) if e != bound => {
            let (coarse, which) = if e.len() <= bound.len() { (e, "empirical") } else { (bound, "bound") };
            let msg = format!("n grids differ; using the coarser {which} grid ({} points) for both", coarse.len());
            (coarse, Some(msg))
        }
        _ => (bound, None),
    }
}

struct CompareInputs<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    built: BuiltBound,
    grid: Vec<u64>,
    warning: Option<String>,
}

fn compare_with<S: Sampler>(s: &S, f: TestFn, inp: CompareInputs<'_>) -> Result<Outcome> {
    let cfg = inp.cfg;
    let dc = DecayConfig {
        n_grid: inp.grid.iter().map(|&n| n as usize).collect(),
        starts: cfg.compare.starts,
        bootstrap: cfg.compare.bootstrap,
        seed: cfg.seed,
        known_mean: None,
        thin: 10,
    };
    let est = estimate_l2_decay(s, &f, &dc)?;
    let bounds: Vec<f64> = est.n.iter().map(|&n| inp.built.rate.bound(n as f64).value).collect();
    let dominated = est.ci_high.iter().zip(&bounds).filter(|(c, b)| c <= b).count();
    let verdict = dominated as f64 / bounds.len() as f64;
    write_csv(
        &inp.out.join("compare.csv"),
        &["n", "bound", "empirical_mean", "ci_low", "ci_high"],
        (0..est.n.len()).map(|j| {
            vec![est.n[j].to_string(), num(bounds[j]), num(est.mean[j]), num(est.ci_low[j]), num(est.ci_high[j])]
        }),
    )?;
    let mut meta = base_meta("compare", cfg);
    meta.insert("case_metadata".into(), inp.built.case_metadata);
    meta.insert("sampler".into(), json!(s.describe()));
    meta.insert("test_fn".into(), json!(est.f));
    meta.insert("osc".into(), json!(est.osc));
    meta.insert("center".into(), json!(est.center));
    meta.insert("centering".into(), json!(est.centering));
    meta.insert("start_source".into(), json!(est.start_source));
    meta.insert("starts".into(), json!(est.starts));
    meta.insert("verdict".into(), json!(verdict));
    meta.insert("verdict_rule".into(), json!("fraction of n with bootstrap 95% ci_high <= bound"));
    meta.insert("grid_warning".into(), json!(inp.warning));
    write_json(&inp.out.join("compare.meta.json"), &meta)?;
    println!("{} with {}: domination verdict {verdict:.3} ({dominated}/{})", s.describe(), est.f, bounds.len());
    Ok(if verdict >= 1.0 { Outcome::Pass } else { Outcome::Fail })
}

fn dispatch<S: Sampler + Clone>(s: S, f: TestFn, inp: CompareInputs<'_>) -> Result<Outcome> {
    if inp.cfg.compare.frozen {
        compare_with(&Frozen(s), f, inp)
    } else {
        compare_with(&s, f, inp)
    }
}

fn test_fn_for(cfg: &RunConfig, names: &[String], default: &str) -> Result<TestFn> {
    Ok(TestFn::parse(cfg.compare.test_fn.as_deref().unwrap_or(default), names)?)
}

pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let built = build_bound(cfg)?;
    let bound_grid = cfg.n_grid.points()?;
    let empirical = cfg.compare.empirical_grid.as_ref().map(NGrid::points).transpose()?;
    let (grid, warning) = reconcile_grids(bound_grid, empirical);
    if let Some(w) = &warning {
        eprintln!("warning: {w}");
    }
    let inp = CompareInputs { cfg, out, built, grid, warning };
    match cfg.case {
        Case::Nig => {
            let s = NigSampler::new(cfg.nig.beta_hyper, cfg.nig.sampler_mode())?;
            let f = test_fn_for(cfg, &s.coord_names(), "tanh:xi")?;
            dispatch(s, f, inp)
        }
        Case::Bayes => {
            let s = BayesSampler::new(cfg.bayes.params(), cfg.bayes.sampler)?;
            let f = test_fn_for(cfg, &s.coord_names(), "tanh:beta0")?;
            dispatch(s, f, inp)
        }
        Case::Ou => {
            let s = OuSampler::new(cfg.ou.params(), cfg.ou.burn_in)?;
            let f = test_fn_for(cfg, &s.coord_names(), "tanh:theta")?;
            dispatch(s, f, inp)
        }
        Case::Finite => {
            let m = finite_model(cfg)?;
            let s = FiniteChainSampler::from_model(&m, FiniteScan::Mwg)?;
            let f = match &cfg.compare.test_fn {
                Some(spec) => TestFn::parse(spec, &s.coord_names())?,
                None => {
                    let mut rng = chain_rng(cfg.seed, u64::MAX);
                    TestFn::Table { values: (0..m.nx * m.ny).map(|_| rng.random_range(-1.0..1.0)).collect() }
                }
            };
            dispatch(s, f, inp)
        }
        Case::Custom => bail!("compare needs a sampling case (nig, bayes, ou or finite)"),
    }
}
