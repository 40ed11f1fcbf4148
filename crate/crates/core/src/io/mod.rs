//! Run configuration and output files.

pub mod config;
pub mod output;

pub use config::{parse_config, RunConfig};
pub use output::{write_trajectory, CSV_HEADER};
