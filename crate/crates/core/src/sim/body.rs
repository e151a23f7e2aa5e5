use serde::{Deserialize, Serialize};

use super::defaults;
use crate::geom::{Aabb, Vec2};

pub type BodyId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Agent,
    GoalSphereLow,
    GoalSphereHigh,
    CubeHeavy,
    CubeLight,
    Wall,
    Fence,
    Ramp,
    DangerRegion,
}

impl BodyKind {
    pub const ALL: [BodyKind; 9] = [
        BodyKind::Agent,
        BodyKind::GoalSphereLow,
        BodyKind::GoalSphereHigh,
        BodyKind::CubeHeavy,
        BodyKind::CubeLight,
        BodyKind::Wall,
        BodyKind::Fence,
        BodyKind::Ramp,
        BodyKind::DangerRegion,
    ];

    pub fn is_static(self) -> bool {
        matches!(self, BodyKind::Wall | BodyKind::Fence | BodyKind::Ramp | BodyKind::DangerRegion)
    }

    /// Ramps and danger regions are footprints only; nothing bumps into them.
    pub fn is_solid(self) -> bool {
        !matches!(self, BodyKind::Ramp | BodyKind::DangerRegion)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BodyKind::Agent => "agent",
            BodyKind::GoalSphereLow => "goal_sphere_low",
            BodyKind::GoalSphereHigh => "goal_sphere_high",
            BodyKind::CubeHeavy => "cube_heavy",
            BodyKind::CubeLight => "cube_light",
            BodyKind::Wall => "wall",
            BodyKind::Fence => "fence",
            BodyKind::Ramp => "ramp",
            BodyKind::DangerRegion => "danger_region",
        }
    }
}

/// Direction a ramp rises toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinal {
    North,
    East,
    South,
    West,
}

impl Cardinal {
    pub const ALL: [Cardinal; 4] = [Cardinal::North, Cardinal::East, Cardinal::South, Cardinal::West];

    pub fn unit(self) -> Vec2 {
        match self {
            Cardinal::North => Vec2::new(0.0, 1.0),
            Cardinal::East => Vec2::new(1.0, 0.0),
            Cardinal::South => Vec2::new(0.0, -1.0),
            Cardinal::West => Vec2::new(-1.0, 0.0),
        }
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Cardinal::North | Cardinal::South)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Circle { radius: f64 },
    Box { half_extents: Vec2 },
}

impl Shape {
    /// Half extents of the bounding box.
    pub fn half_extents(&self) -> Vec2 {
        match *self {
            Shape::Circle { radius } => Vec2::new(radius, radius),
            Shape::Box { half_extents } => half_extents,
        }
    }
}

mod mass_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    // Infinite mass is written as null.
    pub fn serialize<S: Serializer>(m: &f64, s: S) -> Result<S::Ok, S::Error> {
        if m.is_finite() {
            s.serialize_some(m)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub id: BodyId,
    pub kind: BodyKind,
    pub shape: Shape,
    pub position: Vec2,
    pub elevation: f64,
    pub velocity: Vec2,
    #[serde(with = "mass_serde", default = "infinite")]
    pub mass: f64,
    pub restitution: f64,
    pub friction_drag: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uphill: Option<Cardinal>,
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl Body {
    fn dynamic(id: BodyId, kind: BodyKind, shape: Shape, position: Vec2, mass: f64) -> Self {
        Self {
            id,
            kind,
            shape,
            position,
            elevation: 0.0,
            velocity: Vec2::ZERO,
            mass,
            restitution: defaults::RESTITUTION,
            friction_drag: defaults::DRAG,
            uphill: None,
        }
    }

    fn fixed(id: BodyId, kind: BodyKind, center: Vec2, half_extents: Vec2) -> Self {
        Self {
            id,
            kind,
            shape: Shape::Box { half_extents },
            position: center,
            elevation: 0.0,
            velocity: Vec2::ZERO,
            mass: f64::INFINITY,
            restitution: defaults::RESTITUTION,
            friction_drag: 0.0,
            uphill: None,
        }
    }

    pub fn agent(id: BodyId, position: Vec2) -> Self {
        let shape = Shape::Circle { radius: defaults::AGENT_RADIUS };
        Self::dynamic(id, BodyKind::Agent, shape, position, defaults::AGENT_MASS)
    }

    pub fn goal(id: BodyId, high_value: bool, position: Vec2) -> Self {
        let kind = if high_value { BodyKind::GoalSphereHigh } else { BodyKind::GoalSphereLow };
        let shape = Shape::Circle { radius: defaults::GOAL_RADIUS };
        Self::dynamic(id, kind, shape, position, defaults::GOAL_MASS)
    }

    pub fn cube(id: BodyId, heavy: bool, position: Vec2) -> Self {
        let (kind, mass) = if heavy {
            (BodyKind::CubeHeavy, defaults::CUBE_HEAVY_MASS)
        } else {
            (BodyKind::CubeLight, defaults::CUBE_LIGHT_MASS)
        };
        let h = defaults::CUBE_HALF_EXTENT;
        Self::dynamic(id, kind, Shape::Box { half_extents: Vec2::new(h, h) }, position, mass)
    }

    pub fn wall(id: BodyId, center: Vec2, half_extents: Vec2) -> Self {
        Self::fixed(id, BodyKind::Wall, center, half_extents)
    }

    pub fn fence(id: BodyId, center: Vec2, half_extents: Vec2) -> Self {
        Self::fixed(id, BodyKind::Fence, center, half_extents)
    }

    pub fn danger_region(id: BodyId, center: Vec2, half_extents: Vec2) -> Self {
        Self::fixed(id, BodyKind::DangerRegion, center, half_extents)
    }

    pub fn ramp(id: BodyId, center: Vec2, half_extents: Vec2, uphill: Cardinal) -> Self {
        let mut b = Self::fixed(id, BodyKind::Ramp, center, half_extents);
        b.uphill = Some(uphill);
        b
    }

    pub fn is_static(&self) -> bool {
        self.kind.is_static()
    }

    pub fn inverse_mass(&self) -> f64 {
        if self.is_static() || !self.mass.is_finite() {
            0.0
        } else {
            1.0 / self.mass
        }
    }

    pub fn aabb(&self) -> Aabb {
        Aabb { center: self.position, half: self.shape.half_extents() }
    }

    pub fn radius(&self) -> Option<f64> {
        match self.shape {
            Shape::Circle { radius } => Some(radius),
            Shape::Box { .. } => None,
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        if self.is_static() {
            0.0
        } else {
            0.5 * self.mass * self.velocity.norm_sq()
        }
    }

    /// Gap between the two surfaces; negative when overlapping.
    pub fn surface_gap(&self, other: &Body) -> f64 {
        match (self.shape, other.shape) {
            (Shape::Circle { radius: ra }, Shape::Circle { radius: rb }) => {
                (other.position - self.position).norm() - ra - rb
            }
            (Shape::Circle { radius }, Shape::Box { .. }) => circle_box_gap(self.position, radius, &other.aabb()),
            (Shape::Box { .. }, Shape::Circle { radius }) => circle_box_gap(other.position, radius, &self.aabb()),
            (Shape::Box { half_extents: ha }, Shape::Box { half_extents: hb }) => {
                let d = (other.position - self.position).abs();
                let gx = d.x - ha.x - hb.x;
                let gy = d.y - ha.y - hb.y;
                if gx > 0.0 && gy > 0.0 {
                    Vec2::new(gx, gy).norm()
                } else {
                    gx.max(gy)
                }
            }
        }
    }

    /// Ramp progress in `[0, 1]` of a point along the uphill axis.
    pub fn ramp_progress(&self, p: Vec2) -> Option<f64> {
        let up = self.uphill?.unit();
        let half = self.shape.half_extents();
        let along = if up.x != 0.0 { half.x } else { half.y };
        let t = ((p - self.position).dot(up) + along) / (2.0 * along);
        Some(t.clamp(0.0, 1.0))
    }
}

fn circle_box_gap(center: Vec2, radius: f64, b: &Aabb) -> f64 {
    if b.contains(center) {
        let d = (center - b.center).abs();
        let inside = (b.half.x - d.x).min(b.half.y - d.y);
        -inside - radius
    } else {
        b.distance_to(center) - radius
    }
}
