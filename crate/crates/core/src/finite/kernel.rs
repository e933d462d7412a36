use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
const REVERSIBLE_TOL: f64 = 1e-10;
const CROSS_CHECK_TOL: f64 = 1e-10;

/// Row-stochastic matrix together with a stationary law.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteKernel {
    matrix: DMatrix<f64>,
    mu: DVector<f64>,
}

impl FiniteKernel {
    pub fn new(matrix: DMatrix<f64>, mu: DVector<f64>) -> Result<Self> {
        let n = mu.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension { expected: n, got: matrix.nrows().max(matrix.ncols()) });
        }
        if matrix.iter().any(|&v| !(v >= -1e-15) || !v.is_finite()) {
            return Err(Error::InvalidSpec("kernel entries must be finite and nonnegative".into()));
        }
        if mu.iter().any(|&v| !(v >= 0.0)) || (mu.sum() - 1.0).abs() > ROW_TOL * n as f64 {
            return Err(Error::InvalidSpec("stationary law must be a probability vector".into()));
        }
        for (i, row) in matrix.row_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > ROW_TOL * n as f64 {
                return Err(Error::InvalidSpec(format!("row {i} sums to {s}, not 1")));
            }
        }
        let drift = (matrix.tr_mul(&mu) - &mu).amax();
        if drift > STATIONARY_TOL {
            return Err(Error::InvalidSpec(format!("μ is not stationary: residual {drift:e}")));
        }
        Ok(FiniteKernel { matrix, mu })
    }

    pub fn identity(mu: DVector<f64>) -> Result<Self> {
        Self::new(DMatrix::identity(mu.len(), mu.len()), mu)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `(Tf)(x) = Σ_y T(x, y) f(y)`.
    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.matrix * f
    }

    /// Kernel of "first `self`, then `other`", i.e. the operator `self · other`.
    pub fn then(&self, other: &FiniteKernel) -> Result<FiniteKernel> {
        if other.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: other.dim() });
        }
        Ok(FiniteKernel { matrix: &self.matrix * &other.matrix, mu: self.mu.clone() })
    }

    pub fn power(&self, n: u32) -> FiniteKernel {
        let mut out = DMatrix::identity(self.dim(), self.dim());
        for _ in 0..n {
            out = &out * &self.matrix;
        }
        FiniteKernel { matrix: out, mu: self.mu.clone() }
    }

    pub fn detailed_balance_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.mu[i] * self.matrix[(i, j)] - self.mu[j] * self.matrix[(j, i)]).abs());
            }
        }
        worst
    }

    /// `μ^{1/2} T μ^{-1/2}`; symmetric exactly when `T` is `μ`-reversible.
    pub fn symmetrized(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if let Some(i) = self.mu.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::DegenerateState(i));
        }
        let root: Vec<f64> = self.mu.iter().map(|m| m.sqrt()).collect();
        let mut s = DMatrix::from_fn(n, n, |i, j| root[i] * self.matrix[(i, j)] / root[j]);
        // remove rounding asymmetry before the symmetric eigensolve
        let t = s.transpose();
        s = (s + t) * 0.5;
        Ok(s)
    }

    /// Eigenvalues of a reversible kernel in decreasing order.
    pub fn reversible_spectrum(&self) -> Result<Vec<f64>> {
        let r = self.detailed_balance_residual();
        if r > REVERSIBLE_TOL {
            return Err(Error::InvalidMode(format!("kernel is not reversible: residual {r:e}")));
        }
        let mut ev: Vec<f64> = self.symmetrized()?.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(ev)
    }
}

/// Function on the state space with its `μ`-summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub values: DVector<f64>,
    pub centered: bool,
    pub mean: f64,
    pub norm_sq: f64,
    pub osc: f64,
}

impl TestFunction {
    pub fn new(values: DVector<f64>, mu: &DVector<f64>) -> Result<Self> {
        if values.len() != mu.len() {
            return Err(Error::Dimension { expected: mu.len(), got: values.len() });
        }
        let mean = values.dot(mu);
        let norm_sq = values.iter().zip(mu.iter()).map(|(v, m)| m * v * v).sum();
        let osc = values.max() - values.min();
        Ok(TestFunction { centered: mean.abs() <= 1e-12, values, mean, norm_sq, osc })
    }

    /// `f - μ(f)`.
    pub fn centered(values: DVector<f64>, mu: &DVector<f64>) -> Result<Self> {
        if values.len() != mu.len() {
            return Err(Error::Dimension { expected: mu.len(), got: values.len() });
        }
        let mean = values.dot(mu);
        Self::new(values.add_scalar(-mean), mu)
    }
}

pub(crate) fn weighted_dot(a: &DVector<f64>, b: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).zip(mu.iter()).map(|((x, y), m)| m * x * y).sum()
}

/// `E_μ(T, f) = ⟨(I - T)f, f⟩_μ`, cross-checked against `½ Σ μ(x) T(x,y) (f(x) - f(y))²`.
pub fn dirichlet_form(k: &FiniteKernel, f: &TestFunction) -> Result<f64> {
    dirichlet_form_values(k, &f.values)
}

pub(crate) fn dirichlet_form_values(k: &FiniteKernel, f: &DVector<f64>) -> Result<f64> {
    if f.len() != k.dim() {
        return Err(Error::Dimension { expected: k.dim(), got: f.len() });
    }
    let tf = k.apply(f);
    let matrix_form = weighted_dot(f, f, &k.mu) - weighted_dot(&tf, f, &k.mu);
    let n = k.dim();
    let mut double_sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            double_sum += k.mu[i] * k.matrix[(i, j)] * (f[i] - f[j]).powi(2);
        }
    }
    double_sum *= 0.5;
    let scale = 1.0f64.max(weighted_dot(f, f, &k.mu));
    if (matrix_form - double_sum).abs() > CROSS_CHECK_TOL * scale {
        return Err(Error::CrossCheck(format!("Dirichlet forms disagree: {matrix_form} vs {double_sum}")));
    }
    Ok(double_sum)
}

/// `T*(y, x) = μ(x) T(x, y) / μ(y)`.
pub fn adjoint(k: &FiniteKernel) -> Result<FiniteKernel> {
    if let Some(i) = k.mu.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::DegenerateState(i));
    }
    let n = k.dim();
    let m = DMatrix::from_fn(n, n, |i, j| k.mu[j] * k.matrix[(j, i)] / k.mu[i]);
    Ok(FiniteKernel { matrix: m, mu: k.mu.clone() })
}

/// `‖Tⁿf‖²_μ` for `n = 0..=n_max`.
pub fn l2_decay_exact(k: &FiniteKernel, f: &TestFunction, n_max: usize) -> Result<Vec<f64>> {
    if !f.centered {
        return Err(Error::Precondition(format!("test function must be centered, mean is {:e}", f.mean)));
    }
    if f.values.len() != k.dim() {
        return Err(Error::Dimension { expected: k.dim(), got: f.values.len() });
    }
    let mut out = Vec::with_capacity(n_max + 1);
    let mut g = f.values.clone();
    out.push(weighted_dot(&g, &g, &k.mu));
    for _ in 0..n_max {
        g = k.apply(&g);
        let v = weighted_dot(&g, &g, &k.mu);
        let prev = *out.last().unwrap();
        if v > prev * (1.0 + 1e-9) + 1e-15 {
            return Err(Error::CrossCheck(format!("‖Tⁿf‖² increased from {prev:e} to {v:e}")));
        }
        out.push(v);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapMode {
    /// Requires detailed balance.
    Reversible,
    /// Gap of `T*T`, defined for any kernel.
    AdjointProduct,
}

/// `1 - λ₂` of the `μ`-symmetrized kernel; a one-state space has gap 1.
pub fn spectral_gap(k: &FiniteKernel, mode: GapMode) -> Result<f64> {
    let target = match mode {
        GapMode::Reversible => k.clone(),
        GapMode::AdjointProduct => adjoint(k)?.then(k)?,
    };
    let ev = target.reversible_spectrum()?;
    Ok(if ev.len() < 2 { 1.0 } else { 1.0 - ev[1] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_state(p: f64, q: f64) -> FiniteKernel {
        let m = DMatrix::from_row_slice(2, 2, &[1.0 - p, p, q, 1.0 - q]);
        FiniteKernel::new(m, DVector::from_vec(vec![q / (p + q), p / (p + q)])).unwrap()
    }

    fn random_kernel(n: usize, entries: &[f64]) -> FiniteKernel {
        // normalize rows, then find μ by power iteration
        let mut m = DMatrix::from_fn(n, n, |i, j| entries[i * n + j] + 0.01);
        for mut row in m.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        let mut mu = DVector::from_element(n, 1.0 / n as f64);
        for _ in 0..10_000 {
            mu = m.tr_mul(&mu);
        }
        mu /= mu.sum();
        FiniteKernel::new(m, mu).unwrap()
    }

    #[test]
    fn two_state_examples() {
        let k = two_state(0.5, 0.5);
        let f = TestFunction::new(DVector::from_vec(vec![1.0, 0.0]), k.mu()).unwrap();
        assert!((dirichlet_form(&k, &f).unwrap() - 0.25).abs() < 1e-15);
        let g = TestFunction::new(DVector::from_vec(vec![1.0, -1.0]), k.mu()).unwrap();
        let decay = l2_decay_exact(&k, &g, 3).unwrap();
        assert_eq!(decay[0], 1.0);
        assert!(decay[1..].iter().all(|v| v.abs() < 1e-30));
        let (p, q) = (0.2, 0.35);
        assert!((spectral_gap(&two_state(p, q), GapMode::Reversible).unwrap() - (p + q)).abs() < 1e-12);
        // closed-form Dirichlet form pq/(p+q) for f = indicator of state 0
        let k = two_state(p, q);
        let f = TestFunction::new(DVector::from_vec(vec![1.0, 0.0]), k.mu()).unwrap();
        assert!((dirichlet_form(&k, &f).unwrap() - p * q / (p + q)).abs() < 1e-15);
    }

    #[test]
    fn identity_and_projection() {
        let mu = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        let id = FiniteKernel::identity(mu.clone()).unwrap();
        let f = TestFunction::centered(DVector::from_vec(vec![1.0, -2.0, 0.5]), &mu).unwrap();
        assert_eq!(dirichlet_form(&id, &f).unwrap(), 0.0);
        let d = l2_decay_exact(&id, &f, 4).unwrap();
        assert!(d.iter().all(|&v| (v - d[0]).abs() < 1e-15));
        assert!(spectral_gap(&id, GapMode::Reversible).unwrap().abs() < 1e-12);
        let proj = FiniteKernel::new(DMatrix::from_fn(3, 3, |_, j| mu[j]), mu.clone()).unwrap();
        assert!((spectral_gap(&proj, GapMode::Reversible).unwrap() - 1.0).abs() < 1e-12);
        let c = TestFunction::new(DVector::from_element(3, 4.0), &mu).unwrap();
        assert!(dirichlet_form(&proj, &c).unwrap().abs() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let mu = DVector::from_vec(vec![0.5, 0.5]);
        let bad = DMatrix::from_row_slice(2, 2, &[0.6, 0.6, 0.5, 0.5]);
        assert!(matches!(FiniteKernel::new(bad, mu.clone()), Err(Error::InvalidSpec(_))));
        let k = two_state(0.3, 0.3);
        let f = TestFunction::new(DVector::from_vec(vec![1.0, 0.0, 0.0]), &DVector::from_vec(vec![0.2, 0.3, 0.5])).unwrap();
        assert!(matches!(dirichlet_form(&k, &f), Err(Error::Dimension { .. })));
        let unc = TestFunction::new(DVector::from_vec(vec![1.0, 0.0]), k.mu()).unwrap();
        assert!(matches!(l2_decay_exact(&k, &unc, 2), Err(Error::Precondition(_))));
        let degenerate = FiniteKernel::identity(DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!(matches!(adjoint(&degenerate), Err(Error::DegenerateState(1))));
    }

    #[test]
    fn nonreversible_gap_needs_mode() {
        // deterministic rotation on three states
        let mu = DVector::from_element(3, 1.0 / 3.0);
        let m = DMatrix::from_row_slice(3, 3, &[0.1, 0.9, 0.0, 0.0, 0.1, 0.9, 0.9, 0.0, 0.1]);
        let k = FiniteKernel::new(m.clone(), mu).unwrap();
        assert!(matches!(spectral_gap(&k, GapMode::Reversible), Err(Error::InvalidMode(_))));
        assert!(spectral_gap(&k, GapMode::AdjointProduct).unwrap() > 0.0);
        // uniform μ and doubly stochastic: the adjoint is the transpose
        let a = adjoint(&k).unwrap();
        assert!((a.matrix() - m.transpose()).amax() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn adjoint_involution_and_forms(entries in proptest::collection::vec(0.0..1.0f64, 16), fv in proptest::collection::vec(-1.0..1.0f64, 4)) {
            let k = random_kernel(4, &entries);
            let aa = adjoint(&adjoint(&k).unwrap()).unwrap();
            prop_assert!((aa.matrix() - k.matrix()).amax() < 1e-12);
            let f = TestFunction::centered(DVector::from_vec(fv), k.mu()).unwrap();
            let e = dirichlet_form(&k, &f).unwrap();
            prop_assert!(e >= -1e-15);
            // adjoint has the same Dirichlet form
            prop_assert!((e - dirichlet_form(&adjoint(&k).unwrap(), &f).unwrap()).abs() < 1e-12);
            // oscillation contraction
            let tf = k.apply(&f.values);
            prop_assert!(tf.max() - tf.min() <= f.osc + 1e-12);
        }
    }
}
