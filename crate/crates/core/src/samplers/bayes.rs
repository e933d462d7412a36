use super::{metropolis_accept, ChainRng, Sampler};
use crate::case_bounds::{BayesDerived, BayesParams};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesMode {
    /// One isotropic RWM step of scale `σ₀` for `β`.
    Rwm,
    /// Exact Gaussian draw for `β`, i.e. the deterministic-scan Gibbs chain.
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BayesState {
    pub lambda: f64,
    pub beta: DVector<f64>,
    pub accepted: u64,
    pub sweeps: u64,
}

/// `λ | β ~ Γ(a + N/2, b + ½‖Y - Xβ‖²)` exactly, then `β | λ ~ N(u, λ⁻¹(XᵀX)⁻¹)` by RWM or exactly.
#[derive(Clone, Debug)]
pub struct BayesSampler {
    pub params: BayesParams,
    pub derived: BayesDerived,
    pub mode: BayesMode,
    x: DMatrix<f64>,
    y: DVector<f64>,
    u: DVector<f64>,
    /// `‖Y - Xu‖²`.
    rss: f64,
    /// Upper Cholesky factor `R` with `XᵀX = RᵀR`.
    r_upper: DMatrix<f64>,
    lambda_marginal: Gamma<f64>,
}

impl BayesSampler {
    pub fn new(params: BayesParams, mode: BayesMode) -> Result<Self> {
        let derived = params.derive()?;
        let x = params.design()?;
        let y = DVector::from_column_slice(&params.y);
        let u = DVector::from_column_slice(&derived.u);
        let rss = (&y - &x * &u).norm_squared();
        let chol = derived
            .xtx
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Model("XᵀX is not positive definite".into()))?;
        let r_upper = chol.l().transpose();
        let lambda_marginal = Gamma::new(derived.a_prime, 1.0 / derived.b_prime)
            .map_err(|e| Error::Model(format!("lambda marginal: {e}")))?;
        Ok(BayesSampler { params, derived, mode, x, y, u, rss, r_upper, lambda_marginal })
    }

    /// `‖Y - Xβ‖²` via `RSS + (β-u)ᵀXᵀX(β-u)`.
    pub fn residual_sq(&self, beta: &DVector<f64>) -> f64 {
        let d = beta - &self.u;
        self.rss + (&self.r_upper * d).norm_squared()
    }

    /// `‖Y - Xβ‖²` computed from the data directly.
    pub fn residual_sq_direct(&self, beta: &DVector<f64>) -> f64 {
        (&self.y - &self.x * beta).norm_squared()
    }

    /// RWM log acceptance ratio `-½λ(‖Y-Xβ'‖² - ‖Y-Xβ‖²)`.
    pub fn rwm_log_ratio(&self, lambda: f64, beta: &DVector<f64>, proposal: &DVector<f64>) -> f64 {
        -0.5 * lambda * (self.residual_sq(proposal) - self.residual_sq(beta))
    }

    fn draw_lambda(&self, beta: &DVector<f64>, rng: &mut ChainRng) -> f64 {
        let shape = self.params.a + 0.5 * self.derived.n_obs as f64;
        let rate = self.params.b + 0.5 * self.residual_sq(beta);
        let g: f64 = Gamma::new(shape, 1.0).expect("shape is positive").sample(rng);
        (g / rate).max(f64::MIN_POSITIVE)
    }

    fn draw_beta_exact(&self, lambda: f64, rng: &mut ChainRng) -> DVector<f64> {
        let z = DVector::from_fn(self.derived.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = self
            .r_upper
            .solve_upper_triangular(&z)
            .expect("Cholesky factor is nonsingular");
        &self.u + w / lambda.sqrt()
    }
}

impl Sampler for BayesSampler {
    type State = BayesState;

    fn coord_names(&self) -> Vec<String> {
        std::iter::once("lambda".to_string()).chain((0..self.derived.dim).map(|j| format!("beta{j}"))).collect()
    }

    fn initial(&self, _rng: &mut ChainRng) -> BayesState {
        BayesState { lambda: self.derived.a_prime / self.derived.b_prime, beta: self.u.clone(), accepted: 0, sweeps: 0 }
    }

    fn stationary(&self, rng: &mut ChainRng) -> BayesState {
        let lambda: f64 = self.lambda_marginal.sample(rng);
        let lambda = lambda.max(f64::MIN_POSITIVE);
        BayesState { lambda, beta: self.draw_beta_exact(lambda, rng), accepted: 0, sweeps: 0 }
    }

    fn exact_stationary(&self) -> bool {
        true
    }

    fn step(&self, s: &mut BayesState, rng: &mut ChainRng) {
        s.sweeps += 1;
        s.lambda = self.draw_lambda(&s.beta, rng);
        match self.mode {
            BayesMode::Exact => {
                s.beta = self.draw_beta_exact(s.lambda, rng);
                s.accepted += 1;
            }
            BayesMode::Rwm => {
                let sigma0 = self.params.sigma0;
                let prop = DVector::from_fn(self.derived.dim, |j, _| s.beta[j] + sigma0 * rng.sample::<f64, _>(StandardNormal));
                if metropolis_accept(self.rwm_log_ratio(s.lambda, &s.beta, &prop), rng) {
                    s.beta = prop;
                    s.accepted += 1;
                }
            }
        }
    }

    fn coord(&self, s: &BayesState, i: usize) -> f64 {
        if i == 0 {
            s.lambda
        } else {
            s.beta[i - 1]
        }
    }

    fn diagnostics(&self, s: &BayesState) -> Vec<(String, f64)> {
        vec![("acceptance_beta".into(), s.accepted as f64 / s.sweeps.max(1) as f64)]
    }

    fn describe(&self) -> String {
        let mode = match self.mode {
            BayesMode::Rwm => format!("rwm(sigma0={})", self.params.sigma0),
            BayesMode::Exact => "exact".to_string(),
        };
        format!("bayes(N={}, p={}, {mode})", self.derived.n_obs, self.derived.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_bounds::bayes::synthetic_regression;
    use crate::samplers::stats::{gelman_rubin, ks_critical, ks_statistic};
    use crate::samplers::{chain_rng, run_chain};
    use crate::special::{regularized_gamma, GammaKind};
    use proptest::prelude::*;
    use rand::Rng;

    fn sampler(sigma0: f64, mode: BayesMode) -> BayesSampler {
        let (x, y) = synthetic_regression(30, 3, 5);
        BayesSampler::new(BayesParams { a: 2.0, b: 1.0, x, y, sigma0, gamma_dg: 0.5 }, mode).unwrap()
    }

    #[test]
    fn singular_design_is_rejected() {
        let x = vec![vec![1.0, 2.0]; 10];
        let y = vec![0.0; 10];
        assert!(BayesSampler::new(BayesParams { a: 2.0, b: 1.0, x, y, sigma0: 0.1, gamma_dg: 0.5 }, BayesMode::Rwm).is_err());
    }

    #[test]
    fn coordinates_and_schema() {
        let s = sampler(0.5, BayesMode::Rwm);
        assert_eq!(s.coord_names(), vec!["lambda", "beta0", "beta1", "beta2"]);
        let t = run_chain(&s, 1, 0, 20);
        assert_eq!(t.rows.len(), 21);
        assert!(t.rows.iter().all(|r| r.len() == 4 && r[0] > 0.0));
    }

    #[test]
    fn tiny_steps_almost_always_accept() {
        let s = sampler(1e-9, BayesMode::Rwm);
        let t = run_chain(&s, 2, 0, 1000);
        assert!(t.diagnostics[0].1 > 0.99);
    }

    #[test]
    fn stationary_lambda_marginal() {
        let s = sampler(0.1, BayesMode::Exact);
        let (a, b) = (s.derived.a_prime, s.derived.b_prime);
        let mut rng = chain_rng(9, 0);
        let n = 20_000;
        let mut lam = Vec::with_capacity(n);
        for _ in 0..n {
            let mut st = s.stationary(&mut rng);
            s.step(&mut st, &mut rng);
            lam.push(st.lambda);
        }
        let cdf = |l: f64| regularized_gamma(GammaKind::Lower, a, b * l).unwrap();
        assert!(ks_statistic(&lam, &cdf) < ks_critical(n, 0.01));
    }

    #[test]
    fn rwm_preserves_lambda_marginal() {
        let s = sampler(0.2, BayesMode::Rwm);
        let (a, b) = (s.derived.a_prime, s.derived.b_prime);
        let mut rng = chain_rng(10, 0);
        let n = 20_000;
        let lam: Vec<f64> = (0..n)
            .map(|_| {
                let mut st = s.stationary(&mut rng);
                for _ in 0..3 {
                    s.step(&mut st, &mut rng);
                }
                st.lambda
            })
            .collect();
        let cdf = |l: f64| regularized_gamma(GammaKind::Lower, a, b * l).unwrap();
        assert!(ks_statistic(&lam, &cdf) < ks_critical(n, 0.01));
    }

    #[test]
    fn chains_from_initial_mix() {
        let s = sampler(0.2, BayesMode::Rwm);
        let chains: Vec<Vec<f64>> = (0..8).map(|c| run_chain(&s, 4, c, 4000).rows[1000..].iter().map(|r| r[1]).collect()).collect();
        assert!(gelman_rubin(&chains) < 1.05);
    }

    proptest! {
        #[test]
        fn log_ratio_matches_gaussian_density(seed in 0u64..500, lambda in 0.01..10.0f64) {
            let s = sampler(0.3, BayesMode::Rwm);
            let mut rng = chain_rng(seed, 0);
            let b1 = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let b2 = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            // N(u, λ⁻¹(XᵀX)⁻¹) log density up to a constant
            let ld = |b: &DVector<f64>| {
                let d = b - &s.u;
                -0.5 * lambda * d.dot(&(&s.derived.xtx * &d))
            };
            let r = s.rwm_log_ratio(lambda, &b1, &b2);
            prop_assert!((r - (ld(&b2) - ld(&b1))).abs() < 1e-8 * (1.0 + r.abs()));
            let direct = s.residual_sq_direct(&b1);
            prop_assert!((s.residual_sq(&b1) - direct).abs() < 1e-9 * (1.0 + direct));
        }
    }
}
