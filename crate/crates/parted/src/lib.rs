//! File formats, configuration, parallel sweeps and the `parted` command-line
//! front end for [`parted_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod sweep;

pub use error::{CliError, CliResult};
