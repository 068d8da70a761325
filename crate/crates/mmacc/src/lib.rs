//! Command line and file formats for `mmacc-core`.
//!
//! * [`matrix_io`] reads and writes encoder matrices as headerless CSV.
//! * [`report`] holds the JSON and CSV records printed by the binary.
//! * [`experiments`] runs the amplification sweeps.
//! * [`cli`] is the `mmacc` command itself.

pub mod cli;
pub mod experiments;
pub mod matrix_io;
pub mod report;
