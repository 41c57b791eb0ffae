//! File formats, configuration and subcommands of the `delta-metrology`
//! command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod image;
pub mod report;
pub mod scan_io;
pub mod spectrum_io;
pub mod text;
pub mod transport_io;
