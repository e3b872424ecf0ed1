//! Small reverse-mode automatic differentiation engine used by the reward
//! estimator and the translation policy.

mod graph;
mod matrix;
mod optim;
mod params;

pub use graph::{log_sigmoid, log_softmax_rows, sigmoid, Graph, Var};
pub use matrix::Matrix;
pub use optim::{sgd_step, Adam, AdamConfig};
pub use params::{Gradients, ParamId, ParamSet};
