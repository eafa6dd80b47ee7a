//! Labelings, the overlap metric, good partitions and exact posteriors on
//! tiny instances.

mod good;
mod labeling;
mod overlap;
mod posterior;

pub use good::{balance, default_slack, exhaustive_good_search, goodness, GoodnessCheck};
pub use labeling::Labeling;
pub use overlap::{
    birkhoff_bound_check, entropy_bound_check, overlap, overlap_entropy_bound, overlap_matrix, BoundCheck,
    OverlapMatrix,
};
pub use posterior::{
    argmax_lowest, bayes_overlap_experiment, exact_marginals, exact_posterior, same_group_probability,
    BayesOverlapReport, MAX_LOG2_LABELINGS,
};
