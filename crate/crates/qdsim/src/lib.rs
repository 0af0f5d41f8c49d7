//! File formats, configuration, parallel drivers and the command-line
//! front end for `qdsim_core`.

pub mod cli;
pub mod config;
mod error;
pub mod export;
pub mod parallel;
pub mod pipeline;
pub mod qtag;

pub use error::{Error, Result};
