//! Reduction of paving arbitrary elements to paving projections with
//! constant diagonal: real/imaginary split, affine normalization, band
//! flattening, four-way splitting and dilation of corners to projections.

mod dilation;
mod pipeline;
mod steps;

pub use dilation::{dilate_to_projection, Dilation, DILATION_TOL};
pub use pipeline::{
    conjugation_paver, perturbation_delta, reduce_and_pave, ProjectionPaver, ReductionTrace, Stage, CHAIN_TOL,
    MIN_REDUCTION_DIM,
};
pub use steps::{
    band_slices, flatten, four_way_split, normalize_selfadjoint, split_real_imag, Band, BandSlices, Flattened,
    FLAT_TOL, STEP_TOL,
};
