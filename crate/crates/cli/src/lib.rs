//! Configuration, CSV output and subcommand implementations for the `czgate`
//! command-line tool.

pub mod commands;
pub mod config;
pub mod io;
pub mod verify;
