//! File formats, run configuration, and the analysis pipeline behind the
//! `votdr` binary. The heavy lifting (physics, simulation, trace math)
//! lives in `votdr-core`; this crate owns everything that touches disk.

pub mod config;
pub mod csv_out;
pub mod event_file;
pub mod pipeline;
pub mod report;
pub mod svg;
