//! Configuration-driven runner around `heom-core`: loads TOML run specs,
//! dispatches decomposition and propagation, and writes CSV results.

pub mod commands;
pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use config::Config;
pub use error::{CliError, Result};
