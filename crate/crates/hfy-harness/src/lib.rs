//! Experiment harness for Hopfield-Fenchel-Young associative memories.
//!
//! Wraps the core library with everything a batch experiment needs: JSON
//! configuration, IDX / flat-binary dataset ingestion, synthetic pattern
//! generators, query corruption, seeded sweeps over parameter grids, and
//! CSV/JSON result emission. The `hfy` binary exposes one subcommand per
//! experiment (capacity, noise, metastable, basins, free-recall,
//! seq-recall).
//!
//! Sweep cells (one per parameter combination × seed) are independent jobs
//! run on a rayon pool and merged in sorted key order, so outputs do not
//! depend on scheduling.

pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod results;
pub mod synth;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
