//! End-to-end use of the public API: β to K* to rate curve, and finite chains checked
//! against the bound built from their own gaps.

use mwg_bounds::finite::{
    composed_kstar, l2_decay_exact, random_test_functions, run_verification, ComponentMode, FiniteJointModel,
    SliceKind, VerifyConfig,
};
use mwg_bounds::samplers::chain_rng;
use mwg_bounds::wpi::{compose_mwg, conjugate, default_v_grid, KStarFn};
use mwg_bounds::{BetaSpec, CompositionMode, RateBound};
use proptest::prelude::*;

fn curve(k: KStarFn, ns: &[f64]) -> Vec<f64> {
    RateBound::with_defaults(k).unwrap().curve(ns).iter().map(|r| r.value).collect()
}

#[test]
fn indicator_beta_gives_exponential_decay() {
    let k = conjugate(&BetaSpec::indicator(0.2), &default_v_grid()).unwrap();
    for (n, b) in [0.0f64, 5.0, 20.0].iter().zip(curve(k, &[0.0, 5.0, 20.0])) {
        assert!((b - 0.25 * (-0.2 * n).exp()).abs() < 1e-9, "{n}: {b}");
    }
}

#[test]
fn default_verification_passes() {
    let cfg = VerifyConfig { models: 5, functions: 5, ..VerifyConfig::default() };
    let report = run_verification(&cfg).unwrap();
    assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn composed_curves_decrease(g0 in 0.05f64..1.0, g2 in 0.2f64..5.0, alpha in 0.2f64..2.0) {
        let k0 = KStarFn::linear(g0).unwrap();
        let k2 = conjugate(&BetaSpec::power_law(g2, alpha), &default_v_grid()).unwrap();
        let k = compose_mwg(&k0, &KStarFn::identity(), &k2, CompositionMode::Full).unwrap();
        let b = curve(k, &[0.0, 1.0, 10.0, 100.0, 1000.0]);
        prop_assert!(b[0] <= 0.25 + 1e-12);
        prop_assert!(b.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{b:?}");
    }

    #[test]
    fn finite_chains_sit_under_their_bound(nx in 2usize..5, ny in 2usize..5, seed in any::<u64>()) {
        let mut rng = chain_rng(seed, 0);
        let m = FiniteJointModel::random(nx, ny, SliceKind::LazyRwm, &mut rng).unwrap();
        let bound = RateBound::with_defaults(composed_kstar(&m, ComponentMode::WorstSlice).unwrap()).unwrap();
        for f in random_test_functions(&m, 3, &mut rng).unwrap() {
            let decay = l2_decay_exact(&m.p12, &f, 50).unwrap();
            for (n, d) in decay.iter().enumerate() {
                let b = bound.bound(n as f64).value;
                prop_assert!(*d <= b * f.osc * f.osc + 1e-12, "n={n}: {d} > {b}");
            }
        }
    }
}
