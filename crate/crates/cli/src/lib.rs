//! Command implementations behind the `ctsr` binary.

pub mod cli;
mod commands;

pub use commands::run;
