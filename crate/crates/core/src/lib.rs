//! Weak Poincaré inequality calculus for Metropolis-within-Gibbs samplers.
//!
//! * [`wpi`]: β functions, their conjugates `K*`, compositions and rate curves `F⁻¹(n)`.
//! * [`case_bounds`]: β functions and rate exponents for the normal/inverse-gamma, Bayesian
//!   regression and Ornstein–Uhlenbeck examples.
//! * [`finite`]: exact Dirichlet-form checks on finite two-block chains.
//! * [`samplers`]: the case-study samplers and a paired-chain decay estimator.

pub mod case_bounds;
pub mod error;
pub mod finite;
pub mod numeric;
pub mod samplers;
pub mod special;
pub mod wpi;

pub use error::{Error, Result};
pub use wpi::{BetaSpec, CompositionMode, KStarFn, RateBound, RateOptions, RateValue};
