//! File formats, parallel drivers and the command-line tool around
//! `resolveq-core`.

pub mod cli;
pub mod config;
pub mod dataio;
pub mod error;
pub mod manifest;
pub mod parallel;
pub mod report;

pub use error::{Error, ErrorKind, Result};
pub use resolveq_core as core;
