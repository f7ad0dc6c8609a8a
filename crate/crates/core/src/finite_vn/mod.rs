//! The finite tracial algebra `M_m(C)`: normalized trace, the operator, L2 and
//! L1 norms, MASA frames with their conditional expectations, and the
//! Fourier frame perpendicular to the diagonal.

mod frame;
pub mod io;
mod matrix;

pub use frame::{conditional_expectation, perpendicular_frame, MasaFrame, FRAME_UNITARY_TOL};
pub use matrix::{l1_norm, l2_norm, normalized_trace, op_norm, NormTriple, TracedMatrix};

/// Default absolute tolerance for algebraic identities.
pub const DEFAULT_TOL: f64 = 1e-9;
