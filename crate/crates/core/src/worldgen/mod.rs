//! Procedural generation of sandbox and task worlds.
//!
//! Bodies are placed by rejection sampling on a 16×16 grid over the table
//! (cell `(i, j)` is column `i` from the west edge, row `j` from the south
//! edge) with jitter inside the cell. Task worlds are re-rolled until the
//! occupancy-grid flood fill in [`grid`] says the goal is reachable.

mod config;
mod generate;
pub mod grid;
mod suite;

pub use config::{Mode, PuzzleConfig, Task};
pub use generate::{generate, GRID_CELLS, PLACEMENT_ATTEMPTS};
pub use suite::{make_test_suite, make_test_suite_from, sample_sandbox_pool, sandbox_ranges, TestSuite, SUITE_SIZE};

use thiserror::Error;

use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum WorldgenError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unsatisfiable config (seed {seed}): {reason}")]
    Unsatisfiable { seed: u64, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("malformed text: {0}")]
    Parse(String),
    #[error("serialization failed: {0}")]
    Serialize(String),
}
