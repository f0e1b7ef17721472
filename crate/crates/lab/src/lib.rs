//! File formats, staged pipeline and command-line front end for `boundary-core`.

#![forbid(unsafe_code)]

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod network_io;
pub mod pipeline;
pub mod tables;

pub use error::{LabError, Result};
