#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::{Deserialize, Serialize};

use super::body::{Body, BodyId, BodyKind};
use super::contact::contact;
use super::{defaults, SimError};
use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Physics tick (substep index) the contact was resolved in.
    pub tick: u64,
    pub a: BodyId,
    pub b: BodyId,
    pub impulse: f64,
}

impl CollisionEvent {
    pub fn involves(&self, id: BodyId) -> bool {
        self.a == id || self.b == id
    }

    pub fn other(&self, id: BodyId) -> Option<BodyId> {
        if self.a == id {
            Some(self.b)
        } else if self.b == id {
            Some(self.a)
        } else {
            None
        }
    }
}

/// A push applied at a body's center of mass for one substep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceCommand {
    pub target: BodyId,
    direction: Vec2,
    magnitude: f64,
}

impl ForceCommand {
    pub fn new(target: BodyId, direction: Vec2, magnitude: f64) -> Result<Self, SimError> {
        if !((direction.norm() - 1.0).abs() <= 1e-9) {
            return Err(SimError::InvalidForce(format!("direction {direction:?} is not a unit vector")));
        }
        if !(magnitude >= 0.0) || !magnitude.is_finite() {
            return Err(SimError::InvalidForce(format!("magnitude {magnitude} must be finite and >= 0")));
        }
        Ok(Self { target, direction, magnitude })
    }

    pub fn idle(target: BodyId) -> Self {
        Self { target, direction: Vec2::new(0.0, 1.0), magnitude: 0.0 }
    }

    pub fn direction(&self) -> Vec2 {
        self.direction
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    fn vector(&self) -> Vec2 {
        self.direction * self.magnitude
    }
}

/// Full dynamic state of one table world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub bodies: Vec<Body>,
    pub table_half_extent: f64,
    pub wall_height: f64,
    pub fence_height: f64,
    pub tick: u64,
    pub rng_stream: String,
    /// Contacts resolved in the latest substep.
    pub pending_collisions: Vec<CollisionEvent>,
    /// Contacts resolved since the last [`WorldState::begin_macro_step`].
    pub step_collisions: Vec<CollisionEvent>,
}

impl WorldState {
    pub fn new(bodies: Vec<Body>, table_half_extent: f64, rng_stream: impl Into<String>) -> Result<Self, SimError> {
        let world = Self {
            bodies,
            table_half_extent,
            wall_height: defaults::WALL_HEIGHT,
            fence_height: defaults::FENCE_HEIGHT,
            tick: 0,
            rng_stream: rng_stream.into(),
            pending_collisions: Vec::new(),
            step_collisions: Vec::new(),
        };
        world.validate()?;
        Ok(world)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.table_half_extent > 0.0) {
            return Err(SimError::InvalidWorld("table_half_extent must be positive".into()));
        }
        let agents = self.bodies.iter().filter(|b| b.kind == BodyKind::Agent).count();
        if agents != 1 {
            return Err(SimError::InvalidWorld(format!("expected exactly one agent, found {agents}")));
        }
        let mut ids: Vec<BodyId> = self.bodies.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SimError::InvalidWorld("duplicate body id".into()));
        }
        for b in &self.bodies {
            if !b.is_static() && !(b.mass > 0.0 && b.mass.is_finite()) {
                return Err(SimError::InvalidWorld(format!("body {} needs a finite positive mass", b.id)));
            }
            if !(0.0..=1.0).contains(&b.restitution) {
                return Err(SimError::InvalidWorld(format!("body {} restitution out of [0, 1]", b.id)));
            }
            if b.kind == BodyKind::Ramp && b.uphill.is_none() {
                return Err(SimError::InvalidWorld(format!("ramp {} has no uphill direction", b.id)));
            }
        }
        Ok(())
    }

    pub fn body(&self, id: BodyId) -> Option<&Body> {
        self.bodies.iter().find(|b| b.id == id)
    }

    pub fn body_mut(&mut self, id: BodyId) -> Option<&mut Body> {
        self.bodies.iter_mut().find(|b| b.id == id)
    }

    pub fn agent(&self) -> &Body {
        self.bodies.iter().find(|b| b.kind == BodyKind::Agent).expect("world has an agent")
    }

    pub fn agent_id(&self) -> BodyId {
        self.agent().id
    }

    pub fn bodies_of(&self, kind: BodyKind) -> impl Iterator<Item = &Body> {
        self.bodies.iter().filter(move |b| b.kind == kind)
    }

    /// Whether a point lies inside the walled table.
    pub fn in_bounds(&self, p: Vec2) -> bool {
        let h = self.table_half_extent;
        p.x.abs() <= h && p.y.abs() <= h
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.bodies.iter().map(Body::kinetic_energy).sum()
    }

    pub fn momentum(&self) -> Vec2 {
        self.bodies
            .iter()
            .filter(|b| !b.is_static())
            .fold(Vec2::ZERO, |acc, b| acc + b.velocity * b.mass)
    }

    /// Starts a new agent decision: forgets the previous macro-step's contacts.
    pub fn begin_macro_step(&mut self) {
        self.step_collisions.clear();
    }

    /// Advances the world by one physics substep.
    ///
    /// Semi-implicit Euler with linear drag, then one pass of sequential
    /// impulses over every overlapping pair with projection-based positional
    /// correction, then clamping to the table.
    pub fn substep(&mut self, force: &ForceCommand, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SimError::InvalidTimestep(dt));
        }
        let target = self.bodies.iter().position(|b| b.id == force.target).ok_or(SimError::NoSuchBody(force.target))?;
        if self.bodies[target].is_static() {
            return Err(SimError::StaticTarget(force.target));
        }
        self.pending_collisions.clear();

        let push = force.vector();
        for (i, b) in self.bodies.iter_mut().enumerate() {
            if b.is_static() {
                continue;
            }
            let accel = if i == target { push * (1.0 / b.mass) } else { Vec2::ZERO };
            let damping = (1.0 - b.friction_drag * dt).max(0.0);
            b.velocity = (b.velocity + accel * dt) * damping;
            b.position += b.velocity * dt;
        }

        self.update_elevations();
        self.resolve_contacts();
        self.contain();

        self.pending_collisions
            .sort_by(|x, y| x.impulse.total_cmp(&y.impulse).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
        self.step_collisions.extend_from_slice(&self.pending_collisions);
        self.tick += 1;
        Ok(())
    }

    fn update_elevations(&mut self) {
        let fence_height = self.fence_height;
        let top = fence_height * (1.0 + defaults::RAMP_OVERSHOOT);
        let (statics, movers): (Vec<&Body>, Vec<usize>) = {
            let statics = self.bodies.iter().filter(|b| matches!(b.kind, BodyKind::Ramp | BodyKind::Fence)).collect();
            let movers = self
                .bodies
                .iter()
                .enumerate()
                .filter(|(_, b)| !b.is_static())
                .map(|(i, _)| i)
                .collect();
            (statics, movers)
        };
        let mut updates = Vec::with_capacity(movers.len());
        for &i in &movers {
            let b = &self.bodies[i];
            if b.kind != BodyKind::Agent {
                updates.push((i, 0.0));
                continue;
            }
            let on_ramp = statics
                .iter()
                .filter(|r| r.kind == BodyKind::Ramp && r.aabb().contains(b.position))
                .filter_map(|r| r.ramp_progress(b.position))
                .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))));
            let elevation = match on_ramp {
                Some(t) => top * t,
                // Still above a fence it climbed onto: stay up until clear of it.
                None if b.elevation >= fence_height
                    && statics.iter().any(|f| f.kind == BodyKind::Fence && b.surface_gap(f) <= 0.0) =>
                {
                    b.elevation
                }
                None => 0.0,
            };
            updates.push((i, elevation));
        }
        for (i, e) in updates {
            self.bodies[i].elevation = e;
        }
    }

    fn pair_collides(&self, a: &Body, b: &Body) -> bool {
        if a.is_static() && b.is_static() {
            return false;
        }
        if !a.kind.is_solid() || !b.kind.is_solid() {
            return false;
        }
        let over_fence = |fence: &Body, other: &Body| fence.kind == BodyKind::Fence && other.elevation >= self.fence_height;
        !(over_fence(a, b) || over_fence(b, a))
    }

    fn resolve_contacts(&mut self) {
        let n = self.bodies.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if !self.pair_collides(&self.bodies[i], &self.bodies[j]) {
                    continue;
                }
                let Some(c) = contact(&self.bodies[i], &self.bodies[j]) else {
                    continue;
                };
                let (head, tail) = self.bodies.split_at_mut(j);
                let (a, b) = (&mut head[i], &mut tail[0]);
                let (ima, imb) = (a.inverse_mass(), b.inverse_mass());
                let im_sum = ima + imb;
                if im_sum == 0.0 {
                    continue;
                }
                let vn = (b.velocity - a.velocity).dot(c.normal);
                if vn < 0.0 {
                    let e = a.restitution.min(b.restitution);
                    let j_mag = -(1.0 + e) * vn / im_sum;
                    a.velocity -= c.normal * (j_mag * ima);
                    b.velocity += c.normal * (j_mag * imb);
                    self.pending_collisions.push(CollisionEvent { tick: self.tick, a: a.id, b: b.id, impulse: j_mag });
                }
                let correction = defaults::BAUMGARTE * c.penetration / im_sum;
                a.position -= c.normal * (correction * ima);
                b.position += c.normal * (correction * imb);
            }
        }
    }

    fn contain(&mut self) {
        let h = self.table_half_extent;
        for b in self.bodies.iter_mut().filter(|b| !b.is_static()) {
            let ext = b.shape.half_extents();
            let lim = Vec2::new((h - ext.x).max(0.0), (h - ext.y).max(0.0));
            let e = b.restitution;
            if b.position.x > lim.x {
                b.position.x = lim.x;
                if b.velocity.x > 0.0 {
                    b.velocity.x *= -e;
                }
            } else if b.position.x < -lim.x {
                b.position.x = -lim.x;
                if b.velocity.x < 0.0 {
                    b.velocity.x *= -e;
                }
            }
            if b.position.y > lim.y {
                b.position.y = lim.y;
                if b.velocity.y > 0.0 {
                    b.velocity.y *= -e;
                }
            } else if b.position.y < -lim.y {
                b.position.y = -lim.y;
                if b.velocity.y < 0.0 {
                    b.velocity.y *= -e;
                }
            }
        }
    }

    /// True iff the segment `a`–`b` crosses no static blocker (wall or fence)
    /// taller than the agent's current elevation. Grazing contacts within
    /// 1e-9 m count as blocked.
    pub fn raycast_free(&self, a: Vec2, b: Vec2) -> bool {
        let elevation = self.agent().elevation;
        !self.bodies.iter().any(|body| {
            let height = match body.kind {
                BodyKind::Wall => self.wall_height,
                BodyKind::Fence => self.fence_height,
                _ => return false,
            };
            height > elevation && body.aabb().intersects_segment(a, b, defaults::RAYCAST_TOLERANCE)
        })
    }

    /// Contacts involving `id` during the latest macro-step, ordered by
    /// substep and then by ascending impulse.
    pub fn collisions_involving(&self, id: BodyId) -> Result<Vec<CollisionEvent>, SimError> {
        if self.body(id).is_none() {
            return Err(SimError::NoSuchBody(id));
        }
        Ok(self.step_collisions.iter().filter(|e| e.involves(id)).copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Cardinal;

    const DT: f64 = defaults::DT;

    fn world(bodies: Vec<Body>) -> WorldState {
        WorldState::new(bodies, defaults::TABLE_HALF_EXTENT, "test").unwrap()
    }

    fn east(target: BodyId, magnitude: f64) -> ForceCommand {
        ForceCommand::new(target, Vec2::new(1.0, 0.0), magnitude).unwrap()
    }

    #[test]
    fn idle_agent_stays_put() {
        let mut w = world(vec![Body::agent(0, Vec2::ZERO)]);
        w.substep(&ForceCommand::idle(0), DT).unwrap();
        assert_eq!(w.agent().position, Vec2::ZERO);
        assert_eq!(w.tick, 1);
    }

    #[test]
    fn push_east_keeps_y_exactly_zero() {
        let mut w = world(vec![Body::agent(0, Vec2::ZERO)]);
        for _ in 0..10 {
            w.substep(&east(0, defaults::FORCE_MAGNITUDE), DT).unwrap();
        }
        assert!(w.agent().position.x > 0.0);
        assert_eq!(w.agent().position.y, 0.0);
    }

    #[test]
    fn elastic_head_on_exchanges_velocity() {
        let mut agent = Body::agent(0, Vec2::ZERO);
        agent.velocity = Vec2::new(2.0, 0.0);
        agent.restitution = 1.0;
        agent.friction_drag = 0.0;
        // Surfaces 0.02 m apart: contact in the first substep.
        let mut cube = Body::cube(1, false, Vec2::new(0.15 + 0.2 + 0.02, 0.0));
        cube.restitution = 1.0;
        cube.friction_drag = 0.0;
        let mut w = world(vec![agent, cube]);
        w.substep(&ForceCommand::idle(0), DT).unwrap();
        let (va, vc) = (w.bodies[0].velocity, w.bodies[1].velocity);
        // Two-body 1-D elastic oracle: v1' = ((m1-m2)v1 + 2 m2 v2)/(m1+m2).
        let (m1, m2, v1, v2) = (1.0, 1.0, 2.0, 0.0);
        let v1p = ((m1 - m2) * v1 + 2.0 * m2 * v2) / (m1 + m2);
        let v2p = ((m2 - m1) * v2 + 2.0 * m1 * v1) / (m1 + m2);
        assert!((va.x - v1p).abs() < 1e-9 && va.y.abs() < 1e-9, "{va:?}");
        assert!((vc.x - v2p).abs() < 1e-9 && vc.y.abs() < 1e-9, "{vc:?}");
        assert_eq!(w.pending_collisions.len(), 1);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let mut w = world(vec![Body::agent(0, Vec2::ZERO), Body::wall(1, Vec2::new(1.0, 0.0), Vec2::new(0.1, 0.5))]);
        assert_eq!(w.substep(&ForceCommand::idle(9), DT), Err(SimError::NoSuchBody(9)));
        assert_eq!(w.substep(&ForceCommand::idle(0), 0.0), Err(SimError::InvalidTimestep(0.0)));
        assert_eq!(w.substep(&ForceCommand::idle(0), -1.0), Err(SimError::InvalidTimestep(-1.0)));
        assert_eq!(w.substep(&ForceCommand::idle(1), DT), Err(SimError::StaticTarget(1)));
        assert!(ForceCommand::new(0, Vec2::new(1.0, 1.0), 1.0).is_err());
        assert!(ForceCommand::new(0, Vec2::new(1.0, 0.0), -1.0).is_err());
        assert_eq!(w.tick, 0);
    }

    #[test]
    fn world_requires_exactly_one_agent() {
        assert!(WorldState::new(vec![], 2.0, "x").is_err());
        assert!(WorldState::new(vec![Body::agent(0, Vec2::ZERO), Body::agent(1, Vec2::new(1.0, 0.0))], 2.0, "x").is_err());
    }

    #[test]
    fn raycast_cases() {
        let empty = world(vec![Body::agent(0, Vec2::ZERO)]);
        assert!(empty.raycast_free(Vec2::new(-1.9, -1.9), Vec2::new(1.9, 1.9)));

        let walled = world(vec![Body::agent(0, Vec2::new(-1.0, 0.0)), Body::wall(1, Vec2::ZERO, Vec2::new(0.05, 0.5))]);
        assert!(!walled.raycast_free(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)));
        assert!(walled.raycast_free(Vec2::new(-1.0, 1.0), Vec2::new(1.0, 1.0)));

        // Corner of the box at (0.05, 0.5); the segment passes 1e-10 outside it.
        let corner = Vec2::new(0.05, 0.5);
        let off = 1e-10;
        let a = Vec2::new(corner.x + off - 1.0, corner.y + off + 1.0);
        let b = Vec2::new(corner.x + off + 1.0, corner.y + off - 1.0);
        // Exact oracle: the line x + y = c passes at distance |c - 0.55|/sqrt(2) from the corner.
        let dist = ((a.x + a.y) - (corner.x + corner.y)).abs() / 2f64.sqrt();
        assert!(dist < 1e-9);
        assert!(!walled.raycast_free(a, b));
    }

    #[test]
    fn elevated_agent_sees_over_fence() {
        let mut w = world(vec![Body::agent(0, Vec2::new(-1.0, 0.0)), Body::fence(1, Vec2::ZERO, Vec2::new(0.05, 0.5))]);
        assert!(!w.raycast_free(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)));
        w.bodies[0].elevation = 0.25;
        assert!(w.raycast_free(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)));
    }

    #[test]
    fn collisions_involving_orders_and_filters() {
        let mut w = world(vec![
            Body::agent(0, Vec2::ZERO),
            Body::cube(1, false, Vec2::new(0.36, 0.1)),
            Body::cube(2, true, Vec2::new(0.36, -0.31)),
        ]);
        w.bodies[0].velocity = Vec2::new(2.0, 0.0);
        w.begin_macro_step();
        for _ in 0..4 {
            w.substep(&east(0, defaults::FORCE_MAGNITUDE), DT).unwrap();
        }
        let ev = w.collisions_involving(0).unwrap();
        assert!(ev.len() >= 2, "{ev:?}");
        assert!(ev.windows(2).all(|p| (p[0].tick, p[0].impulse) <= (p[1].tick, p[1].impulse)));
        assert!(w.collisions_involving(7).is_err());
        w.begin_macro_step();
        assert!(w.collisions_involving(0).unwrap().is_empty());
    }

    #[test]
    fn ramp_lifts_agent_over_fence() {
        let fence_center = Vec2::new(0.5, 0.0);
        let ramp_half = Vec2::new(0.3, 0.2);
        let ramp_center = Vec2::new(fence_center.x - defaults::FENCE_THICKNESS / 2.0 - ramp_half.x, 0.0);
        let mut w = world(vec![
            Body::agent(0, Vec2::new(-0.6, 0.0)),
            Body::fence(1, fence_center, Vec2::new(defaults::FENCE_THICKNESS / 2.0, 1.0)),
            Body::ramp(2, ramp_center, ramp_half, Cardinal::East),
        ]);
        let mut max_elev: f64 = 0.0;
        for _ in 0..400 {
            w.substep(&east(0, defaults::FORCE_MAGNITUDE), DT).unwrap();
            max_elev = max_elev.max(w.agent().elevation);
        }
        assert!(max_elev >= w.fence_height);
        assert!(w.agent().position.x > fence_center.x + 0.2, "{:?}", w.agent().position);
        assert_eq!(w.agent().elevation, 0.0);
    }

    #[test]
    fn fence_blocks_without_ramp() {
        let mut w = world(vec![
            Body::agent(0, Vec2::new(-0.6, 0.0)),
            Body::fence(1, Vec2::new(0.5, 0.0), Vec2::new(defaults::FENCE_THICKNESS / 2.0, 1.0)),
        ]);
        for _ in 0..400 {
            w.substep(&east(0, defaults::FORCE_MAGNITUDE), DT).unwrap();
        }
        assert!(w.agent().position.x < 0.5);
    }
}
