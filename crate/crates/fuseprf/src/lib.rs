//! Command-line front end and HTTP service over `fuseprf-core`.

pub mod cli;
pub mod config;
pub mod engine;
pub mod serve;
