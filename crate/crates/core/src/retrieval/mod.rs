//! Exact Euclidean nearest-neighbor retrieval and its scoring.

pub mod eval;
pub mod index;
pub mod metrics;

pub use eval::{
    cross_season_matrix, cross_season_matrix_with, describe_corpus, evaluate_descriptor_sets, evaluate_pair,
    Combination, EvalReport, Representation,
};
pub use index::{squared_distance, DescriptorIndex, MatchResult};
pub use metrics::{default_thresholds, fraction_correct, precision_recall, PrPoint};
