//! File formats, figure-data emission and subcommands for PV penetration
//! studies built on [`pvdg_core`].

pub mod commands;
pub mod error;
pub mod io;
pub mod output;

pub use error::{CliError, CliResult};
