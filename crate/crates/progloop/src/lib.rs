//! File formats, the external solver driver and the command line for
//! `progloop-core`.

pub mod cli;
pub mod model;
pub mod report;
pub mod solver;
