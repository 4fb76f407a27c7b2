//! Command implementations behind the `moco` binary.

pub mod commands;
pub mod config;
pub mod image_io;
pub mod manifest;
pub mod report;
