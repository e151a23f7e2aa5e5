use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::WorldgenError;
use crate::sim::{defaults, BodyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sandbox,
    Task,
}

impl Mode {
    /// Numeric code used by `add_change_puzzle` (0 sandbox, 1 task).
    pub fn code(self) -> u8 {
        match self {
            Mode::Sandbox => 0,
            Mode::Task => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Mode::Sandbox),
            1 => Some(Mode::Task),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    None,
    GoalSeeking,
    Preferences,
    Avoidance,
    ToolUse,
}

impl Task {
    pub const EVALUATION: [Task; 4] = [Task::GoalSeeking, Task::Preferences, Task::Avoidance, Task::ToolUse];

    /// Numeric code used by `add_change_puzzle` (0 none, 1–4 tasks).
    pub fn code(self) -> u8 {
        match self {
            Task::None => 0,
            Task::GoalSeeking => 1,
            Task::Preferences => 2,
            Task::Avoidance => 3,
            Task::ToolUse => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Task::None),
            1 => Some(Task::GoalSeeking),
            2 => Some(Task::Preferences),
            3 => Some(Task::Avoidance),
            4 => Some(Task::ToolUse),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::None => "none",
            Task::GoalSeeking => "goal_seeking",
            Task::Preferences => "preferences",
            Task::Avoidance => "avoidance",
            Task::ToolUse => "tool_use",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Task::None, Task::GoalSeeking, Task::Preferences, Task::Avoidance, Task::ToolUse]
            .into_iter()
            .find(|t| t.name() == s)
    }

    /// Action budget N: 100 for the first three tasks, 200 for tool use.
    pub fn action_budget(self) -> Option<u32> {
        match self {
            Task::None => None,
            Task::GoalSeeking | Task::Preferences | Task::Avoidance => Some(100),
            Task::ToolUse => Some(200),
        }
    }
}

/// Declarative recipe for one generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleConfig {
    pub mode: Mode,
    pub task: Task,
    pub seed: u64,
    #[serde(default = "default_half_extent")]
    pub table_half_extent: f64,
    pub counts: BTreeMap<BodyKind, u32>,
    /// Explicit grid cells per kind; entries beyond the listed cells are sampled.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub placement: BTreeMap<BodyKind, Vec<[u8; 2]>>,
}

fn default_half_extent() -> f64 {
    defaults::TABLE_HALF_EXTENT
}

/// Kinds a config may request by count. Walls and fences are structural.
pub(crate) const COUNTABLE: [BodyKind; 7] = [
    BodyKind::Agent,
    BodyKind::GoalSphereLow,
    BodyKind::GoalSphereHigh,
    BodyKind::CubeHeavy,
    BodyKind::CubeLight,
    BodyKind::Ramp,
    BodyKind::DangerRegion,
];

impl PuzzleConfig {
    pub fn sandbox(seed: u64, counts: impl IntoIterator<Item = (BodyKind, u32)>) -> Self {
        let mut c = Self {
            mode: Mode::Sandbox,
            task: Task::None,
            seed,
            table_half_extent: defaults::TABLE_HALF_EXTENT,
            counts: counts.into_iter().collect(),
            placement: BTreeMap::new(),
        };
        c.counts.insert(BodyKind::Agent, 1);
        c
    }

    /// The canonical entity recipe for an evaluation task.
    pub fn for_task(task: Task, seed: u64) -> Self {
        use BodyKind::*;
        let counts: &[(BodyKind, u32)] = match task {
            Task::None => &[],
            Task::GoalSeeking => &[(GoalSphereLow, 1), (CubeHeavy, 1), (CubeLight, 1)],
            Task::Preferences => &[(GoalSphereLow, 1), (GoalSphereHigh, 1), (CubeHeavy, 1), (CubeLight, 1)],
            Task::Avoidance => &[(GoalSphereLow, 1), (DangerRegion, 1), (CubeLight, 1)],
            Task::ToolUse => &[(GoalSphereLow, 1), (Ramp, 1)],
        };
        let mut c = Self::sandbox(seed, counts.iter().copied());
        if task != Task::None {
            c.mode = Mode::Task;
            c.task = task;
        }
        c
    }

    pub fn count(&self, kind: BodyKind) -> u32 {
        self.counts.get(&kind).copied().unwrap_or(0)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), WorldgenError> {
        let bad = |m: String| Err(WorldgenError::InvalidConfig(m));
        match (self.mode, self.task) {
            (Mode::Sandbox, Task::None) => {}
            (Mode::Sandbox, t) => return bad(format!("sandbox mode cannot carry task {}", t.name())),
            (Mode::Task, Task::None) => return bad("task mode needs a task".into()),
            (Mode::Task, _) => {}
        }
        if self.count(BodyKind::Agent) != 1 {
            return bad(format!("exactly one agent required, got {}", self.count(BodyKind::Agent)));
        }
        if let Some(k) = self.counts.keys().chain(self.placement.keys()).find(|k| !COUNTABLE.contains(k)) {
            return bad(format!("{} cannot be requested by count", k.as_str()));
        }
        if !(self.table_half_extent > 0.5 && self.table_half_extent.is_finite()) {
            return bad(format!("table_half_extent {} too small", self.table_half_extent));
        }
        for (kind, cells) in &self.placement {
            if cells.len() as u32 > self.count(*kind) {
                return bad(format!("more placements than {} entities", kind.as_str()));
            }
            if let Some(c) = cells.iter().find(|c| c[0] as usize >= super::GRID_CELLS || c[1] as usize >= super::GRID_CELLS) {
                return bad(format!("cell {c:?} outside the 16x16 grid"));
            }
        }
        use BodyKind::*;
        let need = |kind: BodyKind, task: Task| -> Result<(), WorldgenError> {
            if self.count(kind) == 0 {
                return Err(WorldgenError::InvalidConfig(format!("{} requires at least one {}", task.name(), kind.as_str())));
            }
            Ok(())
        };
        match self.task {
            Task::None => {}
            Task::GoalSeeking => need(GoalSphereLow, self.task)?,
            Task::Preferences => {
                need(GoalSphereLow, self.task)?;
                need(GoalSphereHigh, self.task)?;
            }
            Task::Avoidance => {
                need(GoalSphereLow, self.task)?;
                need(DangerRegion, self.task)?;
            }
            Task::ToolUse => {
                need(GoalSphereLow, self.task)?;
                need(Ramp, self.task)?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String, WorldgenError> {
        toml::to_string(self).map_err(|e| WorldgenError::Serialize(e.to_string()))
    }

    pub fn from_text(text: &str) -> Result<Self, WorldgenError> {
        let c: Self = toml::from_str(text).map_err(|e| WorldgenError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}
