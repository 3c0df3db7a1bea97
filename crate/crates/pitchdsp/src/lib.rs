//! File formats and the command-line front end around `pitchdsp-core`:
//! WAV IO, pitch label files, the binary feature container, CSV exports and
//! metric reports.

pub mod cli;
pub mod config;
pub mod container;
mod error;
pub mod labels;
pub mod report;
pub mod table;
pub mod wav;

pub use error::{Error, Result};
