//! Pavings of matrices over maximal abelian subalgebras.
//!
//! The crate works in the finite tracial algebra `M_m(C)` with normalized
//! trace and provides:
//!
//! * [`finite_vn`]: traces, the operator/L2/L1 norms, MASA frames and
//!   conditional expectations, the Fourier frame perpendicular to the diagonal;
//! * [`paving`]: partitions, compressions, paving defects and paving numbers,
//!   Dixmier averaging and partition search;
//! * [`independence`]: trace-moment residuals of alternating words and the
//!   constructive builders of approximately independent partitions;
//! * [`free_model`]: Haar-random ensembles standing in for free elements and
//!   the norm experiments built on them;
//! * [`reduction`]: the pipeline that reduces paving arbitrary elements to
//!   paving projections with constant diagonal.

pub mod error;
pub mod finite_vn;
pub mod free_model;
pub mod independence;
pub(crate) mod linalg;
mod par;
pub mod paving;
pub mod random;
pub mod reduction;
pub mod report;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use finite_vn::{conditional_expectation, perpendicular_frame, MasaFrame, NormTriple, TracedMatrix};
pub use num_complex::Complex64 as c64;
pub use paving::{Partition, PavingReport, Strategy};

#[cfg(test)]
pub(crate) mod testing {
    pub use crate::random::{random_hermitian, random_matrix};
}
