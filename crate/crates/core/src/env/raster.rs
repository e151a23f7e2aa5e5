//! Flat-shaded orthographic top-down rendering of the table.

use crate::sim::{BodyKind, Shape, WorldState};

pub const OBS_SIZE: usize = 84;
pub const OBS_CHANNELS: usize = 3;
pub const OBS_LEN: usize = OBS_SIZE * OBS_SIZE * OBS_CHANNELS;

pub type Rgb = [u8; 3];

pub mod palette {
    use super::Rgb;

    pub const TABLE: Rgb = [230, 215, 180];
    pub const AGENT: Rgb = [220, 40, 40];
    pub const CUBE_HEAVY: Rgb = [40, 70, 200];
    pub const CUBE_LIGHT: Rgb = [150, 70, 190];
    pub const GOAL_LOW: Rgb = [240, 210, 40];
    pub const GOAL_HIGH: Rgb = [40, 170, 70];
    pub const RAMP: Rgb = [140, 140, 140];
    pub const DANGER: Rgb = [245, 130, 30];
    pub const FENCE: Rgb = [130, 85, 45];
    pub const WALL: Rgb = [70, 70, 70];
}

pub fn color_of(kind: BodyKind) -> Rgb {
    match kind {
        BodyKind::Agent => palette::AGENT,
        BodyKind::GoalSphereLow => palette::GOAL_LOW,
        BodyKind::GoalSphereHigh => palette::GOAL_HIGH,
        BodyKind::CubeHeavy => palette::CUBE_HEAVY,
        BodyKind::CubeLight => palette::CUBE_LIGHT,
        BodyKind::Wall => palette::WALL,
        BodyKind::Fence => palette::FENCE,
        BodyKind::Ramp => palette::RAMP,
        BodyKind::DangerRegion => palette::DANGER,
    }
}

/// Draw order: regions < ramps < fences and walls < cubes < spheres < agent.
pub fn layer_of(kind: BodyKind) -> u8 {
    match kind {
        BodyKind::DangerRegion => 0,
        BodyKind::Ramp => 1,
        BodyKind::Fence | BodyKind::Wall => 2,
        BodyKind::CubeHeavy | BodyKind::CubeLight => 3,
        BodyKind::GoalSphereLow | BodyKind::GoalSphereHigh => 4,
        BodyKind::Agent => 5,
    }
}

/// Renders `world` into a row-major 84×84 RGB buffer. Row 0 is the north
/// edge; a pixel is painted when its center lies inside the body.
pub fn rasterize(world: &WorldState) -> Vec<u8> {
    let mut px = Vec::with_capacity(OBS_LEN);
    for _ in 0..OBS_SIZE * OBS_SIZE {
        px.extend_from_slice(&palette::TABLE);
    }
    let h = world.table_half_extent;
    let scale = OBS_SIZE as f64 / (2.0 * h);
    let mut order: Vec<usize> = (0..world.bodies.len()).collect();
    order.sort_by_key(|&i| (layer_of(world.bodies[i].kind), i));
    for i in order {
        let body = &world.bodies[i];
        let color = color_of(body.kind);
        // Body center in continuous pixel coordinates.
        let cx = (body.position.x + h) * scale;
        let cy = (h - body.position.y) * scale;
        let ext = body.shape.half_extents() * scale;
        let range = |c: f64, e: f64| {
            let lo = (c - e - 0.5).floor().max(0.0) as usize;
            let hi = ((c + e - 0.5).ceil().max(-1.0) + 1.0).min(OBS_SIZE as f64) as usize;
            lo..hi
        };
        for row in range(cy, ext.y) {
            let py = row as f64 + 0.5 - cy;
            for col in range(cx, ext.x) {
                let pxx = col as f64 + 0.5 - cx;
                let inside = match body.shape {
                    Shape::Circle { radius } => {
                        let r = radius * scale;
                        pxx * pxx + py * py <= r * r
                    }
                    Shape::Box { .. } => pxx.abs() <= ext.x && py.abs() <= ext.y,
                };
                if inside {
                    let k = (row * OBS_SIZE + col) * OBS_CHANNELS;
                    px[k..k + 3].copy_from_slice(&color);
                }
            }
        }
    }
    px
}
