//! β functions, conditional gap bounds and rate summaries for the three worked models:
//! normal/inverse-gamma ([`nig`]), Bayesian regression ([`bayes`]) and OU drift
//! estimation ([`ou`], built on [`diffusion`]).

pub mod bayes;
pub mod diffusion;
pub mod nig;
pub mod ou;

pub use bayes::{bayes_beta2, bayes_beta2_envelope, bayes_rate, BayesDerived, BayesParams, BayesRate};
pub use diffusion::{
    diffusion_beta2_indicator, diffusion_segment_bound, girsanov_log_weight, ou_girsanov_log_weight, Drift, OuDrift,
};
pub use nig::{
    nig_conditional_gaps, nig_fixed_betas, nig_fixed_rate, nig_scaled_rate, NigFixedRate, NigParams, NigScaledRate,
    StepSize,
};
pub use ou::{ou_beta2, ou_beta2_envelope, ou_rate, ou_rate_summary, OuDerived, OuParams, OuRate};
