//! The β / K* / F calculus of weak Poincaré inequalities.

mod beta;
mod explog;
mod kstar;
mod rate;

pub use beta::{adjoint_transform_beta, default_cap, tensorize, BetaFamily, BetaSpec, DEFAULT_CAP, DEFAULT_MIXTURE_SAMPLES};
pub use explog::{exp_log_square_rate, ExpLogSquareRate};
pub use kstar::{
    adjoint_transform, chain, compose_mwg, conjugate, conjugate_numeric, conjugate_numeric_rescaled, default_v_grid, scale, CompositionMode,
    KStarFn, KStarInput, KStarRepr, KStarSpec, Operand, U_GRID_MAX, U_GRID_MIN, U_GRID_POINTS,
};
pub use rate::{RateBound, RateOptions, RateValue, DEFAULT_QUADRATURE_NODES, DEFAULT_X_MIN};
