//! Files and command line around `leonet-core`: TOML experiment
//! configurations, CSV and JSON reports, a binary observation container
//! and atomic output.

pub mod cli;
pub mod config;
pub mod emit;
pub mod error;
pub mod fsio;
pub mod obsbin;

pub use config::{load_config, ConfigFile, Scale};
pub use error::{Error, Result};
