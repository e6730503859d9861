//! File formats, release pipelines, and the command-line surface for the
//! tracemark toolkit. The algorithmic core lives in `tracemark-core`; this
//! crate adds everything that touches the filesystem.

pub mod cli;
pub mod commands;
pub mod config;
pub mod detector_io;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod ledger_io;
pub mod manifest;
pub mod oracle;
pub mod release;
pub mod report;

pub use config::{Artifact, RunConfig};
pub use error::{CliError, CliResult};

pub use tracemark_core as core;
