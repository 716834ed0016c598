//! File formats, dataset IO and the experiment harness around
//! [`fairsurv_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod output;

pub use config::ExperimentConfig;
pub use dataset::{load_csv, save_csv, Preset, Schema};
pub use error::{CliError, Result};
