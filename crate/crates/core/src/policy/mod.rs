//! Attention encoder-decoder translation policy with MLE, REINFORCE and
//! off-policy training.

mod log;
mod model;
mod objectives;
mod train;

pub use log::{FeedbackEntry, FeedbackLog};
pub use model::{tempered_log_softmax, Hypothesis, Policy, PolicyConfig, Sample, SequenceScore};
pub use objectives::{
    mle_objective_and_grad, mle_step, opl_objective_and_grad, opl_step, rl_step, rl_surrogate_and_grad,
    sample_with_score_grad, Baseline, RewardFn, RlConfig, StepReport,
};
pub use train::{
    decode_all, evaluate_policy, score_outputs, train_mle, train_opl, train_rl, Decoding, Evaluation, MleConfig,
    OplConfig, Phase, ProgressRecord, ReferenceReward, RlTrainConfig, simulate_feedback_log,
};
