//! Command-line pipeline: split, train, diagnose, lift, propagate, evaluate.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_diagnose, cmd_evaluate, cmd_lift, cmd_pipeline, cmd_propagate, cmd_split, cmd_train, Report};
pub use config::{Overrides, PipelineConfig, Stage};
pub use error::{CliError, CliResult};
