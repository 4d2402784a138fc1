//! Batch front-end for stochavg: TOML experiment configs, artifact emission,
//! ensemble comparison and the acceptance suite.

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod compare;
pub mod config;
pub mod error;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
