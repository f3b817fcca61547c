//! Configuration loading and experiment drivers for the `mahc` binary.

pub mod commands;
pub mod config;
pub mod output;
