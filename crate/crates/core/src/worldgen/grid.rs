//! Occupancy-grid flood fill used as the solvability oracle.
//!
//! A cell is free when an agent-sized circle centered in it touches no
//! blocker. Cubes count as blockers even though they can be pushed, so the
//! check is conservative. With ramp traversal enabled, fences are ignored
//! inside the strip a ramp leads over.

use std::collections::VecDeque;

use super::{Task, GRID_CELLS};
use crate::geom::{Aabb, Vec2};
use crate::sim::{defaults, Body, BodyId, BodyKind, WorldState};

pub struct Occupancy {
    half: f64,
    cell: f64,
    blocked: Vec<bool>,
}

fn ramp_passage(ramp: &Body, cell: f64) -> Option<Aabb> {
    let up = ramp.uphill?;
    let reach = defaults::FENCE_THICKNESS + 2.0 * defaults::AGENT_RADIUS + cell;
    let mut half = ramp.shape.half_extents();
    if up.is_vertical() {
        half.y += reach / 2.0;
    } else {
        half.x += reach / 2.0;
    }
    Some(Aabb { center: ramp.position + up.unit() * (reach / 2.0), half })
}

impl Occupancy {
    pub fn build(world: &WorldState, ramp_traversal: bool) -> Self {
        let half = world.table_half_extent;
        let cell = 2.0 * half / GRID_CELLS as f64;
        let passages: Vec<Aabb> = if ramp_traversal {
            world.bodies_of(BodyKind::Ramp).filter_map(|r| ramp_passage(r, cell)).collect()
        } else {
            Vec::new()
        };
        let r = defaults::AGENT_RADIUS;
        let mut grid = Self { half, cell, blocked: vec![false; GRID_CELLS * GRID_CELLS] };
        for j in 0..GRID_CELLS {
            for i in 0..GRID_CELLS {
                let p = grid.center(i, j);
                let probe = Body::agent(BodyId::MAX, p);
                let outside = p.x.abs() > half - r || p.y.abs() > half - r;
                let hit = world.bodies.iter().any(|b| {
                    let blocks = match b.kind {
                        BodyKind::Wall | BodyKind::CubeHeavy | BodyKind::CubeLight | BodyKind::DangerRegion => true,
                        BodyKind::Fence => !passages.iter().any(|a| a.contains(p)),
                        _ => false,
                    };
                    blocks && probe.surface_gap(b) < 0.0
                });
                grid.blocked[j * GRID_CELLS + i] = outside || hit;
            }
        }
        grid
    }

    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(-self.half + (i as f64 + 0.5) * self.cell, -self.half + (j as f64 + 0.5) * self.cell)
    }

    pub fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let f = |v: f64| (((v + self.half) / self.cell).floor().max(0.0) as usize).min(GRID_CELLS - 1);
        (f(p.x), f(p.y))
    }

    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        self.blocked[j * GRID_CELLS + i]
    }

    /// 4-connected flood fill; the start cell is always entered.
    pub fn flood(&self, start: (usize, usize)) -> Vec<bool> {
        let mut seen = vec![false; GRID_CELLS * GRID_CELLS];
        let mut queue = VecDeque::new();
        seen[start.1 * GRID_CELLS + start.0] = true;
        queue.push_back(start);
        while let Some((i, j)) = queue.pop_front() {
            let mut visit = |ni: usize, nj: usize| {
                let k = nj * GRID_CELLS + ni;
                if !seen[k] && !self.blocked[k] {
                    seen[k] = true;
                    queue.push_back((ni, nj));
                }
            };
            if i > 0 {
                visit(i - 1, j);
            }
            if i + 1 < GRID_CELLS {
                visit(i + 1, j);
            }
            if j > 0 {
                visit(i, j - 1);
            }
            if j + 1 < GRID_CELLS {
                visit(i, j + 1);
            }
        }
        seen
    }
}

/// Whether the agent can get within touching range of body `goal`.
pub fn goal_reachable(world: &WorldState, goal: &Body, ramp_traversal: bool) -> bool {
    let grid = Occupancy::build(world, ramp_traversal);
    let seen = grid.flood(grid.cell_of(world.agent().position));
    let reach = defaults::AGENT_RADIUS + goal.radius().unwrap_or(0.0) + grid.cell;
    (0..GRID_CELLS).any(|j| {
        (0..GRID_CELLS).any(|i| seen[j * GRID_CELLS + i] && (grid.center(i, j) - goal.position).norm() <= reach)
    })
}

/// Task-schema solvability: every goal that contributes to the maximum
/// return is reachable; for tool use the goal must additionally be
/// unreachable without the ramp.
pub fn task_solvable(world: &WorldState, task: Task) -> bool {
    let all_reachable = |kind: BodyKind, ramp: bool| {
        let mut goals = world.bodies_of(kind).peekable();
        goals.peek().is_some() && goals.all(|g| goal_reachable(world, g, ramp))
    };
    match task {
        Task::None => true,
        Task::GoalSeeking | Task::Avoidance => all_reachable(BodyKind::GoalSphereLow, false),
        Task::Preferences => {
            all_reachable(BodyKind::GoalSphereLow, false) && all_reachable(BodyKind::GoalSphereHigh, false)
        }
        Task::ToolUse => {
            let with_ramp = all_reachable(BodyKind::GoalSphereLow, true);
            let without = world.bodies_of(BodyKind::GoalSphereLow).any(|g| goal_reachable(world, g, false));
            with_ramp && !without
        }
    }
}
