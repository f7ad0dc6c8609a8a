//! Partitions of unity in a MASA, compressions `sum_i p_i x p_i`, paving
//! defects and paving numbers, Dixmier averaging, and partition search.

mod exact;
mod ops;
mod partition;
mod problem;
mod search;

pub use exact::{for_each_set_partition, paving_number_exact, ExactPaving, EXHAUSTIVE_MAX_DIM};
pub(crate) use ops::dixmier_in_frame;
pub use ops::{
    arc_index, arc_partition, compress, dixmier_average, paving_defect, paving_defect_with_tail, refine, sign_split,
    spectral_tail_mass, w_tuple, w_tuple_diagonals, PavingReport, MASA_UNITARY_TOL,
};
pub use partition::Partition;
pub use problem::{PavingProblem, DEFAULT_TAIL_EPS, DEGENERATE_NORM};
pub use search::{
    pave_problem, pave_search, roots_of_unity_blocks, FixedSearch, SearchConfig, Strategy, ANNEAL_COOLING,
    ANNEAL_RESTARTS,
};
