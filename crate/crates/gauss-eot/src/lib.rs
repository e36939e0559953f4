//! File formats, experiment driver and command implementations behind the
//! `gauss-eot` binary. The numerics live in `gauss-eot-core`.

pub mod commands;
pub mod exit;
pub mod experiment;
pub mod json;
pub mod problem;

pub use exit::{CliError, CliResult};
