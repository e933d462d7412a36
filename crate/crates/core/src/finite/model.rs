use super::kernel::{spectral_gap, FiniteKernel, GapMode};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

pub const MAX_JOINT_STATES: usize = 64;
const PMF_FLOOR: f64 = 1e-6;

/// How the per-slice conditional updates are built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceKind {
    /// Exact draws from the conditional, so the sampler is deterministic-scan Gibbs.
    Exact,
    /// `½(I + K)` with `K` random-walk Metropolis on neighbouring grid points.
    LazyRwm,
}

/// Two-block target on `{0..nx} × {0..ny}` with every kernel of the scan assembled densely.
///
/// Joint states are indexed `x·ny + y`. `G1`/`H1` move `y` given `x`, `G2`/`H2` move `x` given `y`,
/// and `P = G1 G2` means "update `y`, then `x`".
#[derive(Clone, Debug)]
pub struct FiniteJointModel {
    pub nx: usize,
    pub ny: usize,
    pub pi: DMatrix<f64>,
    /// Row `x` is `Π(· | x)` on `y`.
    pub y_given_x: DMatrix<f64>,
    /// Row `y` is `Π(· | y)` on `x`.
    pub x_given_y: DMatrix<f64>,
    pub h1_slices: Vec<DMatrix<f64>>,
    pub h2_slices: Vec<DMatrix<f64>>,
    pub g1: FiniteKernel,
    pub g2: FiniteKernel,
    pub h1: FiniteKernel,
    pub h2: FiniteKernel,
    pub p: FiniteKernel,
    pub p1: FiniteKernel,
    pub p2: FiniteKernel,
    pub p12: FiniteKernel,
    /// `P_X(x, x') = Σ_y Π(y|x) Π(x'|y)`.
    pub px: FiniteKernel,
    /// `P̄_X(x, x') = Σ_y Π(y|x) H2|y(x, x')`.
    pub pbar_x: FiniteKernel,
}

/// Metropolis chain on `0..w.len()` proposing `i ± 1`, made lazy.
pub fn lazy_rwm(w: &[f64]) -> DMatrix<f64> {
    let k = w.len();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        let mut moved = 0.0;
        for j in [i.wrapping_sub(1), i + 1] {
            if j < k {
                let a = 0.5 * (w[j] / w[i]).min(1.0);
                m[(i, j)] = a;
                moved += a;
            }
        }
        m[(i, i)] = 1.0 - moved;
    }
    (DMatrix::identity(k, k) + m) * 0.5
}

fn exact_slice(w: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(w.len(), w.len(), |_, j| w[j])
}

impl FiniteJointModel {
    pub fn new(pi: DMatrix<f64>, kind: SliceKind) -> Result<Self> {
        let (y_given_x, x_given_y) = conditionals(&pi)?;
        let build = |w: Vec<f64>| match kind {
            SliceKind::Exact => exact_slice(&w),
            SliceKind::LazyRwm => lazy_rwm(&w),
        };
        let h1 = (0..pi.nrows()).map(|x| build(y_given_x.row(x).iter().copied().collect())).collect();
        let h2 = (0..pi.ncols()).map(|y| build(x_given_y.row(y).iter().copied().collect())).collect();
        Self::with_slices(pi, h1, h2)
    }

    /// Assembles the model from user-supplied slice kernels, which must be reversible for their conditional.
    pub fn with_slices(pi: DMatrix<f64>, h1_slices: Vec<DMatrix<f64>>, h2_slices: Vec<DMatrix<f64>>) -> Result<Self> {
        let (nx, ny) = pi.shape();
        let (y_given_x, x_given_y) = conditionals(&pi)?;
        if h1_slices.len() != nx {
            return Err(Error::Dimension { expected: nx, got: h1_slices.len() });
        }
        if h2_slices.len() != ny {
            return Err(Error::Dimension { expected: ny, got: h2_slices.len() });
        }
        for (x, h) in h1_slices.iter().enumerate() {
            check_slice(h, y_given_x.row(x).transpose())?;
        }
        for (y, h) in h2_slices.iter().enumerate() {
            check_slice(h, x_given_y.row(y).transpose())?;
        }
        let n = nx * ny;
        let idx = |x: usize, y: usize| x * ny + y;
        let mu = DVector::from_fn(n, |s, _| pi[(s / ny, s % ny)]);
        let mut g1 = DMatrix::zeros(n, n);
        let mut g2 = DMatrix::zeros(n, n);
        let mut h1 = DMatrix::zeros(n, n);
        let mut h2 = DMatrix::zeros(n, n);
        for x in 0..nx {
            for y in 0..ny {
                for y2 in 0..ny {
                    g1[(idx(x, y), idx(x, y2))] = y_given_x[(x, y2)];
                    h1[(idx(x, y), idx(x, y2))] = h1_slices[x][(y, y2)];
                }
                for x2 in 0..nx {
                    g2[(idx(x, y), idx(x2, y))] = x_given_y[(y, x2)];
                    h2[(idx(x, y), idx(x2, y))] = h2_slices[y][(x, x2)];
                }
            }
        }
        let mu_x = DVector::from_fn(nx, |x, _| pi.row(x).sum());
        let px = &y_given_x * &x_given_y;
        let mut pbar = DMatrix::zeros(nx, nx);
        for y in 0..ny {
            for x in 0..nx {
                let w = y_given_x[(x, y)];
                for x2 in 0..nx {
                    pbar[(x, x2)] += w * h2_slices[y][(x, x2)];
                }
            }
        }
        let g1 = FiniteKernel::new(g1, mu.clone())?;
        let g2 = FiniteKernel::new(g2, mu.clone())?;
        let h1 = FiniteKernel::new(h1, mu.clone())?;
        let h2 = FiniteKernel::new(h2, mu.clone())?;
        Ok(FiniteJointModel {
            nx,
            ny,
            p: g1.then(&g2)?,
            p1: h1.then(&g2)?,
            p2: g1.then(&h2)?,
            p12: h1.then(&h2)?,
            px: FiniteKernel::new(px, mu_x.clone())?,
            pbar_x: FiniteKernel::new(pbar, mu_x)?,
            g1,
            g2,
            h1,
            h2,
            pi,
            y_given_x,
            x_given_y,
            h1_slices,
            h2_slices,
        })
    }

    /// Random joint pmf from a flat Dirichlet, floored at `1e-6` and renormalized.
    pub fn random<R: Rng + ?Sized>(nx: usize, ny: usize, kind: SliceKind, rng: &mut R) -> Result<Self> {
        Self::new(random_pmf(nx, ny, rng)?, kind)
    }

    pub fn mu(&self) -> &DVector<f64> {
        self.p.mu()
    }

    pub fn mu_x(&self) -> &DVector<f64> {
        self.px.mu()
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        x * self.ny + y
    }

    /// `f(x, y) = g(x)`.
    pub fn cylinder(&self, g: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.nx * self.ny, |s, _| g[s / self.ny])
    }

    /// Restriction of a function that depends on `x` only; takes `y = 0`.
    pub fn x_part(&self, f: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.nx, |x, _| f[x * self.ny])
    }

    /// `min_x gap(H1|x)` for `Π(· | x)`.
    pub fn gamma1(&self) -> Result<f64> {
        self.slice_gaps_h1().map(|g| g.into_iter().fold(1.0, f64::min))
    }

    /// `min_y gap(H2|y)` for `Π(· | y)`.
    pub fn gamma2(&self) -> Result<f64> {
        self.slice_gaps_h2().map(|g| g.into_iter().fold(1.0, f64::min))
    }

    pub fn slice_gaps_h1(&self) -> Result<Vec<f64>> {
        (0..self.nx)
            .map(|x| slice_gap(&self.h1_slices[x], self.y_given_x.row(x).transpose()))
            .collect()
    }

    pub fn slice_gaps_h2(&self) -> Result<Vec<f64>> {
        (0..self.ny)
            .map(|y| slice_gap(&self.h2_slices[y], self.x_given_y.row(y).transpose()))
            .collect()
    }

    /// Spectral gap of `P*P`.
    pub fn gamma0(&self) -> Result<f64> {
        spectral_gap(&self.p, GapMode::AdjointProduct)
    }
}

fn slice_gap(h: &DMatrix<f64>, w: DVector<f64>) -> Result<f64> {
    spectral_gap(&FiniteKernel::new(h.clone(), w)?, GapMode::Reversible)
}

fn check_slice(h: &DMatrix<f64>, w: DVector<f64>) -> Result<()> {
    let k = FiniteKernel::new(h.clone(), w)?;
    let r = k.detailed_balance_residual();
    if r > 1e-10 {
        return Err(Error::InvalidSpec(format!("slice kernel is not reversible: residual {r:e}")));
    }
    Ok(())
}

fn conditionals(pi: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (nx, ny) = pi.shape();
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter("joint pmf must be non-empty".into()));
    }
    if nx * ny > MAX_JOINT_STATES {
        return Err(Error::InvalidParameter(format!("at most {MAX_JOINT_STATES} joint states, got {}", nx * ny)));
    }
    if pi.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidSpec("joint pmf must be strictly positive".into()));
    }
    if (pi.sum() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidSpec(format!("joint pmf sums to {}", pi.sum())));
    }
    let mut y_given_x = pi.clone();
    for mut row in y_given_x.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    let mut x_given_y = pi.transpose();
    for mut row in x_given_y.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    Ok((y_given_x, x_given_y))
}

/// Row-major description of a joint model, as stored in fixture files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteFixture {
    pub pi: Vec<Vec<f64>>,
    /// Slice kernels for `y | x`; exact conditionals when absent.
    #[serde(default)]
    pub h1_slices: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub h2_slices: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default = "default_kind")]
    pub kind: SliceKind,
}

fn default_kind() -> SliceKind {
    SliceKind::LazyRwm
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(Error::InvalidSpec("matrix must be non-empty".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::Dimension { expected: m, got: r.len() });
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl FiniteFixture {
    pub fn build(&self) -> Result<FiniteJointModel> {
        let pi = rows_to_matrix(&self.pi)?;
        if pi.len() > MAX_JOINT_STATES {
            return Err(Error::InvalidParameter(format!("at most {MAX_JOINT_STATES} joint states, got {}", pi.len())));
        }
        match (&self.h1_slices, &self.h2_slices) {
            (None, None) => FiniteJointModel::new(pi, self.kind),
            (Some(h1), Some(h2)) => {
                let h1 = h1.iter().map(|m| rows_to_matrix(m)).collect::<Result<_>>()?;
                let h2 = h2.iter().map(|m| rows_to_matrix(m)).collect::<Result<_>>()?;
                FiniteJointModel::with_slices(pi, h1, h2)
            }
            _ => Err(Error::InvalidSpec("give both h1_slices and h2_slices or neither".into())),
        }
    }
}

pub fn random_pmf<R: Rng + ?Sized>(nx: usize, ny: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if nx * ny > MAX_JOINT_STATES || nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter(format!("need 1 ≤ nx·ny ≤ {MAX_JOINT_STATES}, got {nx}×{ny}")));
    }
    let mut m = DMatrix::from_fn(nx, ny, |_, _| <Exp1 as Distribution<f64>>::sample(&Exp1, rng));
    let s = m.sum();
    m /= s;
    m.apply(|v| *v = v.max(PMF_FLOOR));
    let s = m.sum();
    m /= s;
    Ok(m)
}

/// Lazy RWM on a random target of size `n`.
pub fn random_reversible_kernel<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<FiniteKernel> {
    let w = random_pmf(1, n, rng)?;
    let w: Vec<f64> = w.iter().copied().collect();
    FiniteKernel::new(lazy_rwm(&w), DVector::from_vec(w))
}

/// `A ⊗ B` acting on independent coordinates, with stationary law `μ_A ⊗ μ_B`.
pub fn tensor_product(a: &FiniteKernel, b: &FiniteKernel) -> Result<FiniteKernel> {
    FiniteKernel::new(a.matrix().kronecker(b.matrix()), a.mu().kronecker(b.mu()))
}
