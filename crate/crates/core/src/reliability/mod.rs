//! Reliability of human ratings: Krippendorff's alpha, per-rater
//! standardization, filter sweeps and the accompanying significance tests.

mod alpha;
mod filters;
mod intra;
mod matrix;
mod normalize;
mod report;
pub mod stats;

pub use alpha::{krippendorff_alpha, ReliabilityReport};
pub use filters::{
    consistency_filter_sweep, item_variance_filter_sweep, unit_agreement_scores, unit_grid, FilterCurve, FilterPoint,
};
pub use intra::{intra_rater_alpha, intra_rater_alphas, rater_pair_alphas};
pub use matrix::{MatrixEntry, ReliabilityMatrix, RepeatPolicy, Scale};
pub use normalize::{zscore_normalize, Normalized};
pub use report::{analyze_reliability, IntraSummary, ReliabilityAnalysis, TaskReliability};
pub use stats::{anova_oneway, welch_t_test, AnovaResult, WelchResult};
