//! File formats, configuration and subcommands of the `nvcycle` tool.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod files;
