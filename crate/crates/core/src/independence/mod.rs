//! Trace-moment independence between a MASA and test sets: word residuals,
//! certified bilinear and linear bounds, the mixing sign-unitary search, the
//! recursive halving builder, and incremental patching of a diagonal unitary.

mod builder;
mod certificate;
mod mixing;
mod patch;
mod residual;
mod words;

pub use builder::{build_independent_partition, BUILDER_WORD_BUDGET, BUILDER_WORD_LEVEL};
pub use certificate::{
    certify_alpha, check_block_conditions, check_block_conditions_with_alpha, AlphaCertificate, ConditionCheck,
    ConditionReport, CONDITION_TOL,
};
pub use mixing::{find_mixing_sign_unitary, MixingOutcome, MIXING_RESTARTS};
pub use patch::{incremental_patch_haar, patch_with_dim, PatchReport, PATCH_CANDIDATES, PATCH_WORD_LEVEL};
pub use residual::{k_independence_residual, k_independence_residual_with_letters, IndependenceReport, MAX_WORD_LEVEL};
pub use words::MAX_WORDS_PER_LEVEL;
