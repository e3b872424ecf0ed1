pub mod autodiff;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod nn;
pub mod policy;
pub mod ratings;
pub mod reliability;
pub mod service;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
