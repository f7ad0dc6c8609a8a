//! Haar-random ensembles as finite models of free elements, freeness
//! diagnostics, the norm experiments for free conjugates and projections, and
//! the calibration of their tolerances over reference seeds.

mod calibration;
mod ensemble;
mod experiments;
mod freeness;

pub use calibration::{calibration_targets, run_calibration_target, CalibrationEntry, CalibrationTarget, Quantity};
pub use ensemble::{root_of_unity, roots_of_unity_exponents, sample, EnsembleKind, EnsembleSpec};
pub use experiments::{
    conjugation_bound, conjugation_paving_experiment, fitted_exponent, growth_series, half_split_bound,
    half_split_experiment, kesten_free_value, kesten_norm_oracle, power_conjugation_growth, projection_bound,
    projection_paving_experiment, GrowthReport, KestenReport, NormExperimentReport,
};
pub use freeness::{freeness_residual, FreenessReport, MAX_FREENESS_LEVEL};
