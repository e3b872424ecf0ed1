//! Reward estimator `r(x, y)` trained on cardinal or pairwise feedback.

mod auxiliary;
mod loss;
mod model;
mod targets;
mod train;

pub use auxiliary::make_aux_data;
pub use loss::{mse_loss_and_grad, preference_probability, pw_loss_and_grad};
pub use model::{Encoded, Estimator, EstimatorConfig, CONTINUATION_SUFFIX};
pub use targets::{
    aggregate_preferences, human_estimator_data, human_q, prepare_cardinal_targets, q_from_scores, simulated_q, CardinalTargets,
    PreferencePair, RewardExample,
};
pub use train::{
    evaluate_estimator, train_estimator, BatchSource, EstimatorData, EstimatorTrainConfig, EvalExample, Objective,
    TrainRecord, TrainReport,
};
