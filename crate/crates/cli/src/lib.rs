//! Command-line front end: configuration, built-in cycle dates, descriptive
//! tables and the end-to-end pipeline.

pub mod config;
pub mod dates;
pub mod describe;
pub mod pipeline;
