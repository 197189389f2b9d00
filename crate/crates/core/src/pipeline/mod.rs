//! Command-line pipeline: one subcommand per stage, a shared config file
//! and an append-only provenance manifest.

pub mod cli;
pub mod commands;
pub mod config;
pub mod manifest;

pub use cli::{run, Cli, Command};
pub use config::ConfigFile;
pub use manifest::{FileDigest, PipelineManifest, StageRecord};
