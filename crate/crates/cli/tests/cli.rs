use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mwg-bounds"));
    c.env_remove("MWG_BOUNDS_OUT");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn meta(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn indicator_bound_at_zero() {
    let dir = TempDir::new().unwrap();
    let o = run(&["bound", "--beta", "indicator:0.2", "--n", "0"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("bound.csv"));
    assert_eq!(rows, vec![vec!["n", "bound"], vec!["0", "0.25"]]);
    let m = meta(&dir.path().join("bound.meta.json"));
    assert_eq!(m["case"], "custom");
    assert_eq!(m["seed"], 0);
    assert_eq!(m["case_metadata"]["kstar"], "(0.2*v)");
}

#[test]
fn nig_scaled_curve_is_exponential() {
    let dir = TempDir::new().unwrap();
    let o = run(&["bound", "--case", "nig", "--mode", "scaled", "--gamma", "0.1", "--n", "0..1000:250"], dir.path());
    assert_eq!(code(&o), 0);
    let kappa = meta(&dir.path().join("bound.meta.json"))["case_metadata"]["kappa"].as_f64().unwrap();
    for row in csv_rows(&dir.path().join("bound.csv")).iter().skip(1) {
        let (n, b): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert!((b - 0.25 * (-kappa * n).exp()).abs() < 1e-9);
    }
}

#[test]
fn bayes_metadata_carries_exponent() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(&["bound", "--case", "bayes", "--n", "0,5,50"], dir.path())), 0);
    let m = &meta(&dir.path().join("bound.meta.json"))["case_metadata"];
    assert_eq!(m["exponent_formula"], "min(a_prime, b_prime/C2)");
    assert!(m["exponent"].as_f64().unwrap() > 0.0);
}

#[test]
fn invalid_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let o = run(&["bound", "--k0", "power_law:1:0.5", "--k2", "indicator:0.5", "--composition", "strong"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("linear"));
    assert_eq!(code(&run(&["bound", "--case", "nig", "--mode", "exact_gibbs"], dir.path())), 2);
    assert_eq!(code(&run(&["bound", "--beta", "indicator:-1"], dir.path())), 2);
    assert_eq!(code(&run(&["bound", "--n", "5..1"], dir.path())), 2);
    assert_eq!(code(&run(&["verify", "--trials", "0"], dir.path())), 2);
    assert_eq!(code(&run(&["sample", "--case", "custom"], dir.path())), 2);
    assert_eq!(code(&run(&["bound", "--no-such-flag"], dir.path())), 2);
}

#[test]
fn verify_default_and_smoke() {
    let dir = TempDir::new().unwrap();
    let start = std::time::Instant::now();
    let o = run(&["verify"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(start.elapsed().as_secs_f64() < 10.0);
    let report = fs::read_to_string(dir.path().join("verify_report.txt")).unwrap();
    assert!(report.contains("overall: PASS"));
    assert_eq!(meta(&dir.path().join("verify.meta.json"))["passed"], true);
    assert_eq!(code(&run(&["verify", "--states", "2x2", "--trials", "1"], dir.path())), 0);
}

#[test]
fn corrupted_fixture_is_invalid_input() {
    let dir = TempDir::new().unwrap();
    let fixture = dir.path().join("bad.json");
    fs::write(
        &fixture,
        r#"{"pi": [[0.25, 0.25], [0.25, 0.25]],
            "h1_slices": [[[0.5, 0.4], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]],
            "h2_slices": [[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]]}"#,
    )
    .unwrap();
    let o = run(&["verify", "--fixture", fixture.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid spec"), "{}", String::from_utf8_lossy(&o.stderr));

    let good = dir.path().join("good.json");
    fs::write(&good, r#"{"pi": [[0.1, 0.2], [0.3, 0.4]]}"#).unwrap();
    assert_eq!(code(&run(&["verify", "--fixture", good.to_str().unwrap()], &dir.path().join("out"))), 0);
}

#[test]
fn sampling_is_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["sample", "--case", "nig", "--mode", "mwg_scaled", "--chains", "8", "--steps", "10000", "--seed", "7"];
    assert_eq!(code(&run(&args, a.path())), 0);
    let mut single = args.to_vec();
    single.extend(["--parallelism", "1"]);
    assert_eq!(code(&run(&single, b.path())), 0);
    for c in 0..8 {
        let name = format!("trace_chain_{c:03}.csv");
        let (x, y) = (fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        assert_eq!(x, y, "{name} differs");
        assert_eq!(String::from_utf8_lossy(&x).lines().count(), 10_002);
    }
    assert!(!a.path().join("trace_chain_008.csv").exists());
    let m = meta(&a.path().join("sample.meta.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["chains"].as_array().unwrap().len(), 8);
}

#[test]
fn ou_and_bayes_samples() {
    let dir = TempDir::new().unwrap();
    let o = run(&["sample", "--case", "ou", "--segments-grid", "64", "--chains", "2", "--steps", "300"], dir.path());
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("acceptance_segment_1"));
    let m = meta(&dir.path().join("sample.meta.json"));
    assert_eq!(m["discretization"]["m_grid"], 64);
    let rate = m["mean_diagnostics"]["acceptance_segment_1"].as_f64().unwrap();
    assert!(rate > 0.0 && rate <= 1.0);
    assert_eq!(csv_rows(&dir.path().join("trace_chain_000.csv"))[0], vec!["step", "theta"]);

    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(&["sample", "--case", "bayes", "--sigma0", "0.5", "--steps", "50"], dir.path())), 0);
    assert_eq!(csv_rows(&dir.path().join("trace_chain_000.csv"))[0], vec!["step", "lambda", "beta0", "beta1"]);
}

#[test]
fn finite_compare_dominates() {
    let dir = TempDir::new().unwrap();
    let o = run(&["compare", "--case", "finite", "--n", "0..100:10"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rows = csv_rows(&dir.path().join("compare.csv"));
    assert_eq!(rows[0], vec!["n", "bound", "empirical_mean", "ci_low", "ci_high"]);
    assert_eq!(rows.len(), 12);
    assert_eq!(meta(&dir.path().join("compare.meta.json"))["verdict"], 1.0);
}

#[test]
fn nig_compare_reports_verdict() {
    let dir = TempDir::new().unwrap();
    let o = run(&["compare", "--case", "nig", "--mode", "scaled", "--n", "0..20:5", "--starts", "500"], dir.path());
    assert!(code(&o) == 0 || code(&o) == 1);
    let m = meta(&dir.path().join("compare.meta.json"));
    assert!(m["verdict"].as_f64().is_some());
    assert!(m["verdict_rule"].as_str().unwrap().contains("ci_high"));
}

#[test]
fn frozen_chain_fails_the_verdict() {
    let dir = TempDir::new().unwrap();
    let fixture = dir.path().join("uniform.json");
    fs::write(&fixture, r#"{"pi": [[0.25, 0.25], [0.25, 0.25]]}"#).unwrap();
    let args = ["compare", "--case", "finite", "--fixture", fixture.to_str().unwrap(), "--test-fn", "tanh:state:0.1:1.5"];
    let mut frozen = args.to_vec();
    frozen.extend(["--frozen", "--n", "20..200:20"]);
    let o = run(&frozen, &dir.path().join("out"));
    assert_eq!(code(&o), 1);
    assert_eq!(meta(&dir.path().join("out/compare.meta.json"))["verdict"], 0.0);
}

#[test]
fn mismatched_grids_use_the_coarser() {
    let dir = TempDir::new().unwrap();
    let o = run(&["compare", "--case", "finite", "--n", "0..20", "--empirical-n", "0,10,20"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("coarser"));
    assert_eq!(csv_rows(&dir.path().join("compare.csv")).len(), 4);
}

#[test]
fn config_file_env_and_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"case": "custom", "seed": 11, "n_grid": [0, 10], "custom": {"kstar": "indicator:0.5"}}"#).unwrap();
    let out = dir.path().join("from-env");
    let o = bin()
        .args(["bound", "--config", cfg.to_str().unwrap(), "--seed", "12"])
        .env("MWG_BOUNDS_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = meta(&out.join("bound.meta.json"));
    assert_eq!(m["seed"], 12);
    assert_eq!(m["config"]["n_grid"], serde_json::json!([0, 10]));
    let rows = csv_rows(&out.join("bound.csv"));
    assert!((rows[2][1].parse::<f64>().unwrap() - 0.25 * (-5.0f64).exp()).abs() < 1e-9);

    fs::write(&cfg, r#"{"case": "custom", "sed": 1}"#).unwrap();
    assert_eq!(code(&run(&["bound", "--config", cfg.to_str().unwrap()], dir.path())), 2);
}

#[test]
fn bound_output_is_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["bound", "--case", "ou", "--n", "0..50"];
    assert_eq!(code(&run(&args, a.path())), 0);
    assert_eq!(code(&run(&args, b.path())), 0);
    for f in ["bound.csv", "bound.meta.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn estimated_gamma_replaces_the_default() {
    let dir = TempDir::new().unwrap();
    let o = run(&["bound", "--case", "nig", "--estimate-gamma", "--n", "0,10"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = &meta(&dir.path().join("bound.meta.json"))["case_metadata"];
    assert_eq!(m["gamma_estimate"]["source"], "finite_proxy(8x8)");
    let g = m["gamma_dg"].as_f64().unwrap();
    assert!(g > 0.0 && g <= 1.0 && g != 0.5);
    assert_eq!(m["gamma_estimate"]["proxy"]["gamma"].as_f64().unwrap(), g);
    assert_eq!(code(&run(&["bound", "--case", "ou", "--estimate-gamma"], dir.path())), 2);
    assert_eq!(code(&run(&["bound", "--case", "nig", "--estimate-gamma", "--gamma", "0.3"], dir.path())), 2);
}
