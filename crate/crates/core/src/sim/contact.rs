use super::body::{Body, Shape};
use crate::geom::{Aabb, Vec2};

/// Overlap between two bodies. `normal` points from the first body toward
/// the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Contact {
    pub normal: Vec2,
    pub penetration: f64,
}

pub(crate) fn contact(a: &Body, b: &Body) -> Option<Contact> {
    match (a.shape, b.shape) {
        (Shape::Circle { radius: ra }, Shape::Circle { radius: rb }) => {
            circle_circle(a.position, ra, b.position, rb)
        }
        (Shape::Circle { radius }, Shape::Box { .. }) => circle_box(a.position, radius, &b.aabb()),
        (Shape::Box { .. }, Shape::Circle { radius }) => {
            circle_box(b.position, radius, &a.aabb()).map(|c| Contact { normal: -c.normal, ..c })
        }
        (Shape::Box { .. }, Shape::Box { .. }) => box_box(&a.aabb(), &b.aabb()),
    }
}

fn circle_circle(pa: Vec2, ra: f64, pb: Vec2, rb: f64) -> Option<Contact> {
    let d = pb - pa;
    let dist_sq = d.norm_sq();
    let reach = ra + rb;
    if dist_sq >= reach * reach {
        return None;
    }
    let dist = dist_sq.sqrt();
    let normal = if dist > 0.0 { d * (1.0 / dist) } else { Vec2::new(1.0, 0.0) };
    Some(Contact { normal, penetration: reach - dist })
}

fn circle_box(c: Vec2, r: f64, b: &Aabb) -> Option<Contact> {
    if b.contains(c) {
        // Push out through the nearest face.
        let rel = c - b.center;
        let dx = b.half.x - rel.x.abs();
        let dy = b.half.y - rel.y.abs();
        let (outward, depth) = if dx <= dy {
            (Vec2::new(if rel.x >= 0.0 { 1.0 } else { -1.0 }, 0.0), dx)
        } else {
            (Vec2::new(0.0, if rel.y >= 0.0 { 1.0 } else { -1.0 }), dy)
        };
        return Some(Contact { normal: -outward, penetration: depth + r });
    }
    let q = b.closest_point(c);
    let d = q - c;
    let dist_sq = d.norm_sq();
    if dist_sq >= r * r {
        return None;
    }
    let dist = dist_sq.sqrt();
    Some(Contact { normal: d * (1.0 / dist), penetration: r - dist })
}

fn box_box(a: &Aabb, b: &Aabb) -> Option<Contact> {
    let d = b.center - a.center;
    let ox = a.half.x + b.half.x - d.x.abs();
    let oy = a.half.y + b.half.y - d.y.abs();
    if ox <= 0.0 || oy <= 0.0 {
        return None;
    }
    if ox <= oy {
        let s = if d.x >= 0.0 { 1.0 } else { -1.0 };
        Some(Contact { normal: Vec2::new(s, 0.0), penetration: ox })
    } else {
        let s = if d.y >= 0.0 { 1.0 } else { -1.0 };
        Some(Contact { normal: Vec2::new(0.0, s), penetration: oy })
    }
}
