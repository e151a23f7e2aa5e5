use rand::Rng as _;

use super::grid::task_solvable;
use super::{Mode, PuzzleConfig, Task, WorldgenError};
use crate::geom::{Aabb, Vec2};
use crate::seed::{self, Rng};
use crate::sim::{defaults, Body, BodyId, BodyKind, Cardinal, WorldState};

pub const GRID_CELLS: usize = 16;
/// Rejection-sampling attempts per body before giving up.
pub const PLACEMENT_ATTEMPTS: u32 = 1000;
/// Whole-layout rerolls when a task world fails the reachability check.
const LAYOUT_ATTEMPTS: u32 = 64;
/// Minimum surface separation between sampled bodies.
const SPAWN_GAP: f64 = 0.02;
/// Separation between structural pieces that sit flush against each other.
const FLUSH_GAP: f64 = 1e-4;
/// Side of the tool-use enclosure, fence center line to center line.
const ENCLOSURE_SIDE: f64 = 1.25;
/// Clearance kept between the enclosure and the table edge.
const ENCLOSURE_MARGIN: f64 = 0.5;
const RAMP_HALF_ALONG: f64 = 0.3;
const RAMP_HALF_ACROSS: f64 = 0.2;
const DANGER_HALF_RANGE: (f64, f64) = (0.25, 0.45);

/// Builds the world described by `config`. Identical configs give
/// bit-identical worlds.
pub fn generate(config: &PuzzleConfig) -> Result<WorldState, WorldgenError> {
    config.validate()?;
    let mut rng = seed::stream(config.seed, "worldgen", 0);
    for _ in 0..LAYOUT_ATTEMPTS {
        let bodies = Layout::new(config, &mut rng).build()?;
        let world = WorldState::new(bodies, config.table_half_extent, format!("world/{}", config.seed))?;
        if config.mode == Mode::Sandbox || task_solvable(&world, config.task) {
            return Ok(world);
        }
    }
    Err(WorldgenError::Unsatisfiable {
        seed: config.seed,
        reason: format!("no layout passed the reachability check in {LAYOUT_ATTEMPTS} attempts"),
    })
}

#[derive(Clone, Copy)]
enum Region {
    Anywhere,
    Inside(Aabb),
    Outside(Aabb),
}

impl Region {
    fn admits(&self, b: &Body) -> bool {
        let bb = b.aabb();
        match self {
            Region::Anywhere => true,
            Region::Inside(r) => {
                let (lo, hi) = (bb.min(), bb.max());
                let (rlo, rhi) = (r.min(), r.max());
                lo.x >= rlo.x && lo.y >= rlo.y && hi.x <= rhi.x && hi.y <= rhi.y
            }
            Region::Outside(r) => {
                let d = (bb.center - r.center).abs();
                d.x >= bb.half.x + r.half.x || d.y >= bb.half.y + r.half.y
            }
        }
    }
}

struct Layout<'a> {
    config: &'a PuzzleConfig,
    rng: &'a mut Rng,
    half: f64,
    cell: f64,
    bodies: Vec<Body>,
    /// Interior of the tool-use enclosure, and its outer footprint.
    enclosure: Option<(Aabb, Aabb)>,
}

impl<'a> Layout<'a> {
    fn new(config: &'a PuzzleConfig, rng: &'a mut Rng) -> Self {
        let half = config.table_half_extent;
        Self { config, rng, half, cell: 2.0 * half / GRID_CELLS as f64, bodies: Vec::new(), enclosure: None }
    }

    fn unsatisfiable(&self, reason: String) -> WorldgenError {
        WorldgenError::Unsatisfiable { seed: self.config.seed, reason }
    }

    fn next_id(&self) -> BodyId {
        self.bodies.len() as BodyId
    }

    fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(-self.half + (i as f64 + 0.5) * self.cell, -self.half + (j as f64 + 0.5) * self.cell)
    }

    fn fits(&self, b: &Body) -> bool {
        let bb = b.aabb();
        let lim = self.half - 1e-6;
        if bb.max().x > lim || bb.max().y > lim || bb.min().x < -lim || bb.min().y < -lim {
            return false;
        }
        self.bodies.iter().all(|o| b.surface_gap(o) >= SPAWN_GAP)
    }

    fn build(mut self) -> Result<Vec<Body>, WorldgenError> {
        use BodyKind::*;
        let mut ramps = self.config.count(Ramp);
        if self.config.task == Task::ToolUse {
            self.build_enclosure()?;
            ramps -= 1;
        }
        for _ in 0..self.config.count(DangerRegion) {
            let (lo, hi) = DANGER_HALF_RANGE;
            let half = Vec2::new(self.rng.random_range(lo..hi), self.rng.random_range(lo..hi));
            self.place(DangerRegion, Region::Anywhere, move |id, p| Body::danger_region(id, p, half))?;
        }
        let interior = self.enclosure.map(|(inner, _)| Region::Inside(inner)).unwrap_or(Region::Anywhere);
        let exterior = self.enclosure.map(|(_, outer)| Region::Outside(outer)).unwrap_or(Region::Anywhere);
        for _ in 0..ramps {
            let uphill = Cardinal::ALL[self.rng.random_range(0..4)];
            let half = ramp_half(uphill);
            self.place(Ramp, exterior, move |id, p| Body::ramp(id, p, half, uphill))?;
        }
        self.place(Agent, interior, Body::agent)?;
        for _ in 0..self.config.count(GoalSphereLow) {
            self.place(GoalSphereLow, exterior, |id, p| Body::goal(id, false, p))?;
        }
        for _ in 0..self.config.count(GoalSphereHigh) {
            self.place(GoalSphereHigh, exterior, |id, p| Body::goal(id, true, p))?;
        }
        for _ in 0..self.config.count(CubeHeavy) {
            self.place(CubeHeavy, exterior, |id, p| Body::cube(id, true, p))?;
        }
        for _ in 0..self.config.count(CubeLight) {
            self.place(CubeLight, exterior, |id, p| Body::cube(id, false, p))?;
        }
        Ok(self.bodies)
    }

    /// Places the next body of `kind`, at its explicit cell when the config
    /// lists one, otherwise by rejection sampling inside `region`.
    fn place(&mut self, kind: BodyKind, region: Region, make: impl Fn(BodyId, Vec2) -> Body) -> Result<(), WorldgenError> {
        let placed = self.bodies.iter().filter(|b| b.kind == kind).count();
        let explicit = self.config.placement.get(&kind).and_then(|cells| cells.get(placed)).copied();
        if let Some([i, j]) = explicit {
            let body = make(self.next_id(), self.cell_center(i as usize, j as usize));
            if !(region.admits(&body) && self.fits(&body)) {
                return Err(self.unsatisfiable(format!("{} cannot be placed at cell ({i}, {j})", kind.as_str())));
            }
            self.bodies.push(body);
            return Ok(());
        }
        for _ in 0..PLACEMENT_ATTEMPTS {
            let (i, j) = (self.rng.random_range(0..GRID_CELLS), self.rng.random_range(0..GRID_CELLS));
            let jitter = Vec2::new(self.rng.random_range(-0.5..0.5), self.rng.random_range(-0.5..0.5)) * self.cell;
            let body = make(self.next_id(), self.cell_center(i, j) + jitter);
            if region.admits(&body) && self.fits(&body) {
                self.bodies.push(body);
                return Ok(());
            }
        }
        Err(self.unsatisfiable(format!("no room for {} after {PLACEMENT_ATTEMPTS} attempts", kind.as_str())))
    }

    /// Fence ring whose center lines run through grid-cell centers, with a
    /// ramp against one inner face rising toward it.
    fn build_enclosure(&mut self) -> Result<(), WorldgenError> {
        let t = defaults::FENCE_THICKNESS;
        let span_cells = (ENCLOSURE_SIDE / self.cell).ceil() as usize;
        let side = span_cells as f64 * self.cell;
        let valid: Vec<usize> = (0..GRID_CELLS.saturating_sub(span_cells))
            .filter(|&i| {
                let lo = self.cell_center(i, 0).x - t / 2.0;
                lo >= -self.half + ENCLOSURE_MARGIN && lo + side + t <= self.half - ENCLOSURE_MARGIN
            })
            .collect();
        if valid.is_empty() {
            return Err(self.unsatisfiable("table too small for the fence enclosure".into()));
        }
        let i0 = valid[self.rng.random_range(0..valid.len())];
        let j0 = valid[self.rng.random_range(0..valid.len())];
        let lo = Vec2::new(self.cell_center(i0, 0).x, self.cell_center(0, j0).y);
        let hi = lo + Vec2::new(side, side);
        let mid = (lo + hi) * 0.5;

        let horizontal = Vec2::new((side + t) / 2.0, t / 2.0);
        let vertical = Vec2::new(t / 2.0, (side - t) / 2.0 - FLUSH_GAP);
        for (center, half) in [
            (Vec2::new(mid.x, lo.y), horizontal),
            (Vec2::new(mid.x, hi.y), horizontal),
            (Vec2::new(lo.x, mid.y), vertical),
            (Vec2::new(hi.x, mid.y), vertical),
        ] {
            let id = self.next_id();
            self.bodies.push(Body::fence(id, center, half));
        }

        let inner_half = side / 2.0 - t / 2.0;
        let inner = Aabb { center: mid, half: Vec2::new(inner_half, inner_half) };
        let outer = Aabb { center: mid, half: Vec2::new(side / 2.0 + t / 2.0 + SPAWN_GAP, side / 2.0 + t / 2.0 + SPAWN_GAP) };

        let uphill = Cardinal::ALL[self.rng.random_range(0..4)];
        let up = uphill.unit();
        let half = ramp_half(uphill);
        let slack = inner_half - RAMP_HALF_ACROSS - SPAWN_GAP;
        let offset = self.rng.random_range(-slack..slack);
        let across = Vec2::new(up.y.abs(), up.x.abs()) * offset;
        let center = mid + up * (inner_half - FLUSH_GAP - RAMP_HALF_ALONG) + across;
        let id = self.next_id();
        self.bodies.push(Body::ramp(id, center, half, uphill));

        self.enclosure = Some((inner, outer));
        Ok(())
    }
}

fn ramp_half(uphill: Cardinal) -> Vec2 {
    if uphill.is_vertical() {
        Vec2::new(RAMP_HALF_ACROSS, RAMP_HALF_ALONG)
    } else {
        Vec2::new(RAMP_HALF_ALONG, RAMP_HALF_ACROSS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::BodyKind::*;
    use crate::worldgen::grid::goal_reachable;

    fn min_gap(w: &WorldState) -> f64 {
        let mut g = f64::INFINITY;
        for (i, a) in w.bodies.iter().enumerate() {
            for b in &w.bodies[i + 1..] {
                g = g.min(a.surface_gap(b));
            }
        }
        g
    }

    #[test]
    fn sandbox_counts_and_spacing() {
        let cfg = PuzzleConfig::sandbox(7, [(CubeLight, 2), (GoalSphereLow, 2), (GoalSphereHigh, 1)]);
        let w = generate(&cfg).unwrap();
        assert_eq!(w.bodies.len(), 6);
        assert_eq!(w.bodies_of(Agent).count(), 1);
        assert_eq!(w.bodies_of(CubeLight).count(), 2);
        assert_eq!(w.bodies_of(GoalSphereLow).count() + w.bodies_of(GoalSphereHigh).count(), 3);
        assert!(min_gap(&w) >= 1e-6);
        assert_eq!(generate(&cfg).unwrap(), w);
    }

    #[test]
    fn explicit_cell_placement() {
        let mut cfg = PuzzleConfig::sandbox(1, [(CubeLight, 1)]);
        cfg.placement.insert(Agent, vec![[8, 4]]);
        let w = generate(&cfg).unwrap();
        // Cell (8, 4) center: x = -2 + 8.5 * 0.25, y = -2 + 4.5 * 0.25.
        assert_eq!(w.agent().position, Vec2::new(0.125, -0.875));
    }

    #[test]
    fn tool_use_layout_needs_the_ramp() {
        for seed in 0..20 {
            let w = generate(&PuzzleConfig::for_task(Task::ToolUse, seed)).unwrap();
            assert_eq!(w.bodies_of(Fence).count(), 4);
            assert_eq!(w.bodies_of(Ramp).count(), 1);
            let goal = w.bodies_of(GoalSphereLow).next().unwrap();
            assert!(!goal_reachable(&w, goal, false), "seed {seed}");
            assert!(goal_reachable(&w, goal, true), "seed {seed}");
            assert!(min_gap(&w) >= 1e-6);
        }
    }

    #[test]
    fn overcrowded_config_fails_fast() {
        let cfg = PuzzleConfig::sandbox(3, [(CubeHeavy, 200)]);
        assert!(matches!(generate(&cfg), Err(WorldgenError::Unsatisfiable { .. })));
    }

    #[test]
    fn blocked_explicit_cell_fails() {
        let mut cfg = PuzzleConfig::sandbox(3, []);
        cfg.placement.insert(Agent, vec![[0, 0]]);
        assert!(generate(&cfg).is_err());
    }
}
