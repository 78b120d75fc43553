//! Command-line front end: run configuration, one runner per subcommand and
//! the acceptance checks behind `rwre verify`.

pub mod commands;
pub mod config;
pub mod suite;
