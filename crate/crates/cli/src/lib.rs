//! Batch harness for the `qps` command: configuration parsing, mode drivers
//! and artifact output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod table;

pub use config::{parse_config, Format, Mode, ParsedConfig, RunConfig};
pub use error::CliError;
pub use report::{run_to_dir, RunReport, SCHEMA_VERSION};
