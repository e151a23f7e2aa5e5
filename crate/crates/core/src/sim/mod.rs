//! Deterministic 2.5D rigid-body simulation of the walled table.
//!
//! Bodies move in the plane; the agent additionally carries a scalar
//! elevation that ramps raise, which is what lets it cross fences. There is
//! no rotation. All arithmetic is plain `f64` (add, mul, div, sqrt) so a
//! given command sequence reproduces bit-for-bit on any IEEE-754 platform.

mod body;
mod contact;
mod world;

pub use body::{Body, BodyId, BodyKind, Cardinal, Shape};
pub use world::{CollisionEvent, ForceCommand, WorldState};

use thiserror::Error;

/// Physical defaults for the table world.
pub mod defaults {
    pub const TABLE_HALF_EXTENT: f64 = 2.0;
    pub const WALL_HEIGHT: f64 = 0.5;
    pub const FENCE_HEIGHT: f64 = 0.2;
    pub const FENCE_THICKNESS: f64 = 0.1;
    /// Ramp top sits this fraction of the fence height above the fence.
    pub const RAMP_OVERSHOOT: f64 = 0.5;

    pub const AGENT_RADIUS: f64 = 0.15;
    pub const AGENT_MASS: f64 = 1.0;
    pub const GOAL_RADIUS: f64 = 0.1;
    pub const GOAL_MASS: f64 = 0.5;
    pub const CUBE_HALF_EXTENT: f64 = 0.2;
    pub const CUBE_HEAVY_MASS: f64 = 5.0;
    pub const CUBE_LIGHT_MASS: f64 = 1.0;

    pub const RESTITUTION: f64 = 0.5;
    pub const DRAG: f64 = 2.0;
    pub const FORCE_MAGNITUDE: f64 = 6.0;
    pub const DT: f64 = 1.0 / 60.0;

    pub const BAUMGARTE: f64 = 0.2;
    pub const RAYCAST_TOLERANCE: f64 = 1e-9;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no such body: {0}")]
    NoSuchBody(BodyId),
    #[error("body {0} is static and cannot be pushed")]
    StaticTarget(BodyId),
    #[error("invalid timestep {0}")]
    InvalidTimestep(f64),
    #[error("invalid force: {0}")]
    InvalidForce(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
}
