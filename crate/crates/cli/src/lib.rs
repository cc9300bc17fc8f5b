//! Batch front-end for the iteration: per-step measure tables, parameter
//! sweeps, Wigner grids and limit predictions.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use config::ProtocolConfig;
pub use error::CliError;
