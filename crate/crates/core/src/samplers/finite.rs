use super::{ChainRng, Sampler, TestFn};
use crate::error::{Error, Result};
use crate::finite::{FiniteJointModel, FiniteKernel};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Which assembled scan of a finite joint model to simulate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteScan {
    /// `G₁G₂`.
    Gibbs,
    /// `H₁G₂`.
    FirstMwg,
    /// `G₁H₂`.
    SecondMwg,
    /// `H₁H₂`.
    Mwg,
}

/// Simulates a product of finite kernels by drawing from each row in turn.
#[derive(Clone, Debug)]
pub struct FiniteChainSampler {
    cumulative: Vec<Vec<Vec<f64>>>,
    mu_cumulative: Vec<f64>,
    label: String,
}

fn cumulative_rows(k: &FiniteKernel) -> Vec<Vec<f64>> {
    k.matrix()
        .row_iter()
        .map(|row| {
            let mut acc = 0.0;
            row.iter().map(|v| {
                acc += v;
                acc
            }).collect()
        })
        .collect()
}

fn draw(cum: &[f64], rng: &mut ChainRng) -> usize {
    let u = rng.random::<f64>() * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

impl FiniteChainSampler {
    /// One step applies `kernels[0]`, then `kernels[1]`, and so on.
    pub fn new(kernels: &[&FiniteKernel], label: impl Into<String>) -> Result<Self> {
        let first = kernels.first().ok_or_else(|| Error::InvalidParameter("need at least one kernel".into()))?;
        let n = first.dim();
        if let Some(k) = kernels.iter().find(|k| k.dim() != n) {
            return Err(Error::Dimension { expected: n, got: k.dim() });
        }
        let mut acc = 0.0;
        let mu_cumulative = first.mu().iter().map(|v| {
            acc += v;
            acc
        }).collect();
        Ok(FiniteChainSampler { cumulative: kernels.iter().map(|k| cumulative_rows(k)).collect(), mu_cumulative, label: label.into() })
    }

    pub fn from_model(m: &FiniteJointModel, scan: FiniteScan) -> Result<Self> {
        let (a, b) = match scan {
            FiniteScan::Gibbs => (&m.g1, &m.g2),
            FiniteScan::FirstMwg => (&m.h1, &m.g2),
            FiniteScan::SecondMwg => (&m.g1, &m.h2),
            FiniteScan::Mwg => (&m.h1, &m.h2),
        };
        Self::new(&[a, b], format!("finite({}x{}, {scan:?})", m.nx, m.ny))
    }
}

impl Sampler for FiniteChainSampler {
    type State = usize;

    fn coord_names(&self) -> Vec<String> {
        vec!["state".into()]
    }

    fn initial(&self, _rng: &mut ChainRng) -> usize {
        0
    }

    fn stationary(&self, rng: &mut ChainRng) -> usize {
        draw(&self.mu_cumulative, rng)
    }

    fn exact_stationary(&self) -> bool {
        true
    }

    fn step(&self, s: &mut usize, rng: &mut ChainRng) {
        for k in &self.cumulative {
            *s = draw(&k[*s], rng);
        }
    }

    fn coord(&self, s: &usize, _i: usize) -> f64 {
        *s as f64
    }

    fn analytic_mean(&self, f: &TestFn) -> Option<f64> {
        match f {
            TestFn::Table { values } if values.len() == self.mu_cumulative.len() => {
                let mut prev = 0.0;
                Some(
                    self.mu_cumulative
                        .iter()
                        .zip(values)
                        .map(|(c, v)| {
                            let w = c - prev;
                            prev = *c;
                            w * v
                        })
                        .sum(),
                )
            }
            _ => None,
        }
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}
