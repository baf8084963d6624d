//! Configuration, pipelines and reports behind the `carflow` binary.

pub mod config;
pub mod pipelines;
pub mod report;
