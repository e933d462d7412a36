//! Dense-matrix checks of Dirichlet-form identities and rate bounds on finite two-block targets.

mod kernel;
mod model;
mod verify;

pub use kernel::{adjoint, dirichlet_form, l2_decay_exact, spectral_gap, FiniteKernel, GapMode, TestFunction};
pub use model::{
    lazy_rwm, random_pmf, random_reversible_kernel, tensor_product, FiniteFixture, FiniteJointModel, SliceKind, MAX_JOINT_STATES,
};
pub use verify::{
    component_gaps, composed_kstar, random_test_functions, run_verification, verify_bound_domination,
    verify_identities, verify_tensorization, CheckResult, ComponentGaps, ComponentMode, VerificationReport,
    VerifyConfig, DEFAULT_TOLERANCE, DOMINATION_SLACK,
};
