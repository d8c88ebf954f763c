//! Experiment driver for `youngheat-core`: configuration files, the model
//! registry, file formats, a rayon executor, verification suites and the
//! `youngheat` command line.

// NaN must fall through the `!(x > bound)` guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod formats;
pub mod registry;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{AppError, AppResult};
pub use exec::RayonExecutor;
