//! HTTP rating service: serves session plans, persists ratings append-only
//! and exports the collected judgments.

mod config;
mod http;
mod state;
mod store;

pub use config::{PlanPaths, RaterConfig, ServiceConfig};
pub use http::{router, serve, AppState};
pub use state::{LogEvent, NextTask, Progress, RaterSession, ServiceState, TaskContent};
pub use store::{replay, EventLog, Store};
