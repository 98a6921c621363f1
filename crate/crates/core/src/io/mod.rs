//! Run configuration, CSV serialization and SVG plots.

pub mod config;
pub mod csv;
pub mod plot;
