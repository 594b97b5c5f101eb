//! Command-line front end: CSV and model-file handling, the commands, and
//! the simulation benchmark.

pub mod bench;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod persist;
