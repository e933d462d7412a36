//! Finite-state proxy for the spectral gap of the exact two-block Gibbs sampler: stationary
//! draws of two coordinates are binned into quantile cells, and the gap of `P*P` for the
//! deterministic-scan Gibbs chain on the resulting joint pmf is computed exactly.

use super::stats::quantile;
use super::{chain_rng, Sampler};
use crate::error::{Error, Result};
use crate::finite::{FiniteJointModel, SliceKind, MAX_JOINT_STATES};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProxy {
    pub gamma: f64,
    pub coords: (String, String),
    pub bins: (usize, usize),
    pub samples: usize,
    pub seed: u64,
}

fn cell(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e <= v)
}

/// Bins `samples` stationary draws of coordinates `(i, j)` into `bins` quantile cells.
/// Half a pseudo-count per cell keeps the pmf strictly positive.
pub fn estimate_gibbs_gap<S: Sampler>(
    s: &S,
    coords: (usize, usize),
    bins: (usize, usize),
    samples: usize,
    seed: u64,
) -> Result<GapProxy> {
    let names = s.coord_names();
    let (i, j) = coords;
    if i >= names.len() || j >= names.len() || i == j {
        return Err(Error::InvalidParameter(format!("need two distinct coordinates below {}, got {coords:?}", names.len())));
    }
    let (bx, by) = bins;
    if bx < 2 || by < 2 || bx * by > MAX_JOINT_STATES {
        return Err(Error::InvalidParameter(format!(
            "bins must be at least 2x2 and at most {MAX_JOINT_STATES} cells, got {bx}x{by}"
        )));
    }
    if samples < 10 * bx * by {
        return Err(Error::InvalidParameter(format!("need at least {} samples, got {samples}", 10 * bx * by)));
    }
    let mut rng = chain_rng(seed, 0);
    let draws: Vec<(f64, f64)> = (0..samples)
        .map(|_| {
            let st = s.stationary(&mut rng);
            (s.coord(&st, i), s.coord(&st, j))
        })
        .collect();
    let edges = |k: usize, b: usize| -> Vec<f64> {
        let mut v: Vec<f64> = draws.iter().map(|d| if k == 0 { d.0 } else { d.1 }).collect();
        v.sort_by(f64::total_cmp);
        (1..b).map(|q| quantile(&v, q as f64 / b as f64)).collect()
    };
    let (ex, ey) = (edges(0, bx), edges(1, by));
    let mut counts = DMatrix::from_element(bx, by, 0.5);
    for &(a, b) in &draws {
        counts[(cell(&ex, a), cell(&ey, b))] += 1.0;
    }
    let pi = &counts / counts.sum();
    let m = FiniteJointModel::new(pi, SliceKind::Exact)?;
    Ok(GapProxy {
        gamma: m.gamma0()?,
        coords: (names[i].clone(), names[j].clone()),
        bins,
        samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::ChainRng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Bivariate normal with correlation `rho`, drawn exactly.
    struct Gauss {
        rho: f64,
    }

    impl Sampler for Gauss {
        type State = (f64, f64);

        fn coord_names(&self) -> Vec<String> {
            vec!["x".into(), "y".into()]
        }

        fn initial(&self, rng: &mut ChainRng) -> (f64, f64) {
            let (z1, z2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            (z1, self.rho * z1 + (1.0 - self.rho * self.rho).sqrt() * z2)
        }

        fn exact_stationary(&self) -> bool {
            true
        }

        fn step(&self, st: &mut (f64, f64), rng: &mut ChainRng) {
            *st = self.initial(rng);
        }

        fn coord(&self, st: &(f64, f64), i: usize) -> f64 {
            if i == 0 {
                st.0
            } else {
                st.1
            }
        }

        fn describe(&self) -> String {
            format!("gauss({})", self.rho)
        }
    }

    #[test]
    fn independent_coordinates_have_unit_gap() {
        let p = estimate_gibbs_gap(&Gauss { rho: 0.0 }, (0, 1), (6, 6), 200_000, 1).unwrap();
        assert!(p.gamma > 0.99, "{}", p.gamma);
        assert_eq!(p.coords, ("x".to_string(), "y".to_string()));
    }

    #[test]
    fn gap_shrinks_with_correlation() {
        let rhos = [0.3, 0.7, 0.95];
        let g: Vec<f64> = rhos
            .iter()
            .map(|&rho| estimate_gibbs_gap(&Gauss { rho }, (0, 1), (8, 8), 100_000, 2).unwrap().gamma)
            .collect();
        assert!(g[0] > g[1] && g[1] > g[2], "{g:?}");
        // binning only weakens the dependence, so the proxy stays near or above 1 - rho^2
        for (rho, g) in rhos.iter().zip(&g) {
            assert!(*g >= 1.0 - rho * rho - 0.02 && *g < 1.0 - rho * rho + 0.1, "{rho}: {g}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = Gauss { rho: 0.5 };
        assert!(estimate_gibbs_gap(&s, (0, 0), (4, 4), 10_000, 0).is_err());
        assert!(estimate_gibbs_gap(&s, (0, 2), (4, 4), 10_000, 0).is_err());
        assert!(estimate_gibbs_gap(&s, (0, 1), (9, 9), 10_000, 0).is_err());
        assert!(estimate_gibbs_gap(&s, (0, 1), (4, 4), 10, 0).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let s = Gauss { rho: 0.5 };
        assert_eq!(
            estimate_gibbs_gap(&s, (0, 1), (4, 4), 5_000, 3).unwrap(),
            estimate_gibbs_gap(&s, (0, 1), (4, 4), 5_000, 3).unwrap()
        );
    }
}
