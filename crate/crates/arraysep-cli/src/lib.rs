//! Library side of the experiment harness; the `arraysep` binary is a
//! thin wrapper over these commands so integration tests and fuzz targets
//! can drive them directly.

pub mod bench;
pub mod commands;
pub mod config;
