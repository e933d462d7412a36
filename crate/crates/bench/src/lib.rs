//! Shared fixtures for the criterion benchmarks under `benches/`.

use mwg_bounds::finite::{FiniteJointModel, SliceKind};
use mwg_bounds::samplers::chain_rng;

/// Random lazy-RWM joint model of size `nx × ny`, fixed by `seed`.
pub fn model(nx: usize, ny: usize, seed: u64) -> FiniteJointModel {
    FiniteJointModel::random(nx, ny, SliceKind::LazyRwm, &mut chain_rng(seed, 0)).expect("valid block sizes")
}
