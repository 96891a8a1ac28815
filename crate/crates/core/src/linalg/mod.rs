//! Dense complex linear algebra over labeled tensor-product spaces.
//!
//! Every other module consumes the primitives here: subsystem bookkeeping
//! ([`DimsLabel`]), validated operators ([`StateOperator`], [`PureState`]),
//! spectral helpers and the metric quantities (trace norm, fidelity,
//! purified distance).

mod dims;
mod json;
mod metrics;
mod ops;
mod state;

use std::sync::atomic::{AtomicUsize, Ordering};

pub use dims::{DimsLabel, Subsystem};
pub use json::{MatrixJson, StateJson, SubsystemJson};
pub use metrics::{
    extension_map, fidelity, generalized_fidelity, purified_distance, purify, trace_distance,
    trace_norm, Extension,
};
pub(crate) use metrics::{fidelity_matrices, purify_unchecked};
pub use ops::{
    adjoint, dagger_mul, eigh, hermitian_part, hermitian_residual, identity, kron, kron_all,
    max_abs_diff, min_eigenvalue, operator_norm, partial_trace_matrix, permute_subsystems,
    psd_power, psd_sqrt, random_density_matrix, random_hermitian, random_pure_vector, swap_operator,
    swap_operator_unchecked, trace, Eigh,
};
pub(crate) use ops::ginibre;
pub use state::{PureState, StateOperator};

pub type C64 = num_complex::Complex64;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;

/// Default cap on the total dimension of any operator the crate builds.
pub const DEFAULT_DIM_CAP: usize = 256;

/// Hermiticity tolerance, relative to the operator norm.
pub const TOL_HERM: f64 = 1e-10;
/// Positivity tolerance: minimum eigenvalue must be >= -TOL_PSD * ||.||_inf.
pub const TOL_PSD: f64 = 1e-10;
/// Slack allowed above unit trace for subnormalized states.
pub const TOL_TRACE: f64 = 1e-9;
/// Relative eigenvalue threshold of the support-restricted (generalized) inverse.
pub const PINV_THRESHOLD: f64 = 1e-10;

static DIM_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_DIM_CAP);

/// Current cap on total dimensions.
pub fn dim_cap() -> usize {
    DIM_CAP.load(Ordering::Relaxed)
}

/// Override the dimension cap for the whole process.
pub fn set_dim_cap(cap: usize) {
    DIM_CAP.store(cap.max(1), Ordering::Relaxed);
}

pub(crate) fn check_cap(dim: usize) -> crate::Result<()> {
    let cap = dim_cap();
    if dim > cap {
        return Err(crate::Error::DimensionCap { dim, cap });
    }
    Ok(())
}

#[inline]
pub(crate) fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}
