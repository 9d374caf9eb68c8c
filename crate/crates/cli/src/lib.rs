//! Pipeline commands, report writers and the HTTP rating server behind the
//! `sonar-complexity` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod server;
pub mod svg;
pub mod table;

pub use error::{CliError, Result};
