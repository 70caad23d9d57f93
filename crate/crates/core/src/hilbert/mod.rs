//! Dense linear algebra over tensor-factored Hilbert spaces.
//!
//! Global basis indices are big-endian over the factor list: the first factor
//! is the most significant digit.

mod linalg;
mod local;
mod schmidt;
mod space;
mod state;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub use linalg::{
    fidelity, fidelity_of_matrices, hermitian_defect, hermitian_eigen, identity, kron,
    kron_all, outer, psd_eigen, spectral_norm, support_projector, support_projector_of,
    trace, trace_norm, trace_norm_of_product, unitary_defect,
};
pub(crate) use linalg::SQRT_FLOOR;
pub use local::LocalOp;
pub use schmidt::{schmidt, schmidt_vector, SchmidtDecomposition};
pub use space::{dimension_cap, Bipartition, Fragment, TensorSpace, DIM_CAP_ENV};
pub use state::{partial_trace, Payload, QState};

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub(crate) fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}
