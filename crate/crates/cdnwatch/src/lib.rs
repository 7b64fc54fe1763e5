//! File formats, reports and the command line around [`cdnwatch_core`].

pub mod cli;
pub mod config;
mod error;
pub mod flowlog;
pub mod report;
pub mod truth;

pub use cdnwatch_core as core;
pub use error::{Error, Result};
