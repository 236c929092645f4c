//! IO layer and command implementations for the algorithm-design tool.
//!
//! The algorithmic core lives in `algforge-core`; this crate adds file
//! formats (checkpoints, program JSON, CSV reports), configuration parsing,
//! a rayon-backed run executor and the command-line commands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod exec;
pub mod formats;
pub mod stats;
