//! File formats and subcommand implementations behind the `ctbm` binary.

pub mod commands;
pub mod formats;
