use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{generate, PuzzleConfig, Task, WorldgenError};
use crate::seed;
use crate::sim::BodyKind;

pub const SUITE_SIZE: usize = 100;

/// A fixed, seeded set of evaluation puzzles for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub task: Task,
    pub suite_seed: u64,
    pub puzzles: Vec<PuzzleConfig>,
}

/// Seeds fit in 63 bits so every text format can carry them as integers.
fn puzzle_seed(base: u64, stream: &str, index: u64) -> u64 {
    seed::derive_seed(base, stream, index) & (i64::MAX as u64)
}

impl TestSuite {
    pub fn seeds(&self) -> BTreeSet<u64> {
        self.puzzles.iter().map(|p| p.seed).collect()
    }

    pub fn validate(&self) -> Result<(), WorldgenError> {
        let bad = |m: String| Err(WorldgenError::InvalidConfig(m));
        if self.task == Task::None {
            return bad("suite task must not be none".into());
        }
        if self.puzzles.len() != SUITE_SIZE {
            return bad(format!("suite holds {} puzzles, expected {SUITE_SIZE}", self.puzzles.len()));
        }
        if let Some(p) = self.puzzles.iter().find(|p| p.task != self.task) {
            return bad(format!("puzzle {} has task {}", p.seed, p.task.name()));
        }
        if self.seeds().len() != self.puzzles.len() {
            return bad("puzzle seeds are not pairwise distinct".into());
        }
        self.puzzles.iter().try_for_each(PuzzleConfig::validate)
    }

    pub fn to_text(&self) -> Result<String, WorldgenError> {
        toml::to_string(self).map_err(|e| WorldgenError::Serialize(e.to_string()))
    }

    pub fn from_text(text: &str) -> Result<Self, WorldgenError> {
        let s: Self = toml::from_str(text).map_err(|e| WorldgenError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

/// The canonical 100-puzzle suite for `task`.
pub fn make_test_suite(task: Task, suite_seed: u64) -> Result<TestSuite, WorldgenError> {
    make_test_suite_from(&PuzzleConfig::for_task(task, 0), suite_seed, SUITE_SIZE)
}

/// A suite of `size` puzzles that vary only `template`'s seed. Every puzzle
/// is generated once so unsolvable seeds surface here.
pub fn make_test_suite_from(template: &PuzzleConfig, suite_seed: u64, size: usize) -> Result<TestSuite, WorldgenError> {
    template.validate()?;
    if template.task == Task::None {
        return Err(WorldgenError::InvalidConfig("suite task must not be none".into()));
    }
    let stream = format!("suite/{}", template.task.name());
    let mut seen = BTreeSet::new();
    let mut puzzles = Vec::with_capacity(size);
    let mut index = 0;
    while puzzles.len() < size {
        let s = puzzle_seed(suite_seed, &stream, index);
        index += 1;
        if !seen.insert(s) {
            continue;
        }
        let p = template.with_seed(s);
        generate(&p)?;
        puzzles.push(p);
    }
    Ok(TestSuite { task: template.task, suite_seed, puzzles })
}

/// Inclusive count ranges used when sampling sandbox worlds.
pub fn sandbox_ranges() -> [(BodyKind, RangeInclusive<u32>); 6] {
    [
        (BodyKind::CubeHeavy, 0..=4),
        (BodyKind::CubeLight, 0..=4),
        (BodyKind::GoalSphereLow, 0..=3),
        (BodyKind::GoalSphereHigh, 0..=1),
        (BodyKind::Ramp, 0..=1),
        (BodyKind::DangerRegion, 0..=0),
    ]
}

/// `n` distinct sandbox configs with counts drawn from [`sandbox_ranges`].
pub fn sample_sandbox_pool(n: usize, pool_seed: u64) -> Vec<PuzzleConfig> {
    let mut seen = BTreeSet::new();
    let mut pool = Vec::with_capacity(n);
    let mut index = 0;
    while pool.len() < n {
        let s = puzzle_seed(pool_seed, "sandbox-pool", index);
        let mut rng = seed::stream(pool_seed, "sandbox-counts", index);
        index += 1;
        if !seen.insert(s) {
            continue;
        }
        let counts = sandbox_ranges().map(|(k, r)| (k, rng.random_range(r)));
        pool.push(PuzzleConfig::sandbox(s, counts));
    }
    pool
}
