//! Configuration, commands, JSON reports and SVG output.

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::{cmd_certify, cmd_fiber, cmd_lamination, cmd_transition, write_outputs, Report};
pub use config::{parse_config, Config};
