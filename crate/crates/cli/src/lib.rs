//! Command-line front end and HTTP service for the cell scheduler.

pub mod cli;
pub mod server;
