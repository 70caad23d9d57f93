//! Consistent histories of small closed quantum systems.
//!
//! The crate computes decoherence functionals, partial-trace consistency with
//! respect to fragments of an environment, record projectors, and the
//! redundancy of records across disjoint environment fragments. Everything is
//! dense complex linear algebra over a tensor-factored Hilbert space whose
//! total dimension is capped (see [`hilbert::dimension_cap`]).
//!
//! Module map:
//!
//! * [`hilbert`]: tensor spaces, states, partial traces, fidelity, trace norm,
//!   Schmidt decomposition, support projectors.
//! * [`histories`]: projector families, schedules, class operators, branch
//!   states, the decoherence functional and coarse-graining.
//! * [`ptrace`]: partial-trace decoherence functionals, operator-valued
//!   consistency factors, the fidelity identity and record detection.
//! * [`redundancy`]: disjoint certifying fragments and redundant consistency.
//! * [`models`]: builders for the CNOT branching model and its variants.
//! * [`cli`]: scenario files, report emission and the command-line driver.

pub mod cli;
pub mod error;
pub mod hilbert;
pub mod histories;
pub mod models;
pub mod ptrace;
pub mod redundancy;
pub mod tolerance;

pub use error::{Error, Result};
pub use hilbert::{CMatrix, CVector, Fragment, QState, TensorSpace, C64};
pub use histories::{History, HistorySet};
pub use tolerance::Tolerances;
