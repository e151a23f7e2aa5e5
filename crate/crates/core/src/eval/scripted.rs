use rand::Rng as _;

use super::{EvalError, SuiteActor};
use crate::env::raster::{palette, Rgb};
use crate::env::{OBS_CHANNELS, OBS_SIZE, NUM_ACTIONS};
use crate::seed::Rng;

/// Uniformly random actions from the evaluation stream.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformActor;

impl SuiteActor for UniformActor {
    fn act(&mut self, _pixels: &[u8], rng: &mut Rng) -> Result<usize, EvalError> {
        Ok(rng.random_range(0..NUM_ACTIONS))
    }
}

/// Steers the agent straight at the nearest pixel of `target`; moves north
/// when either colour is missing.
#[derive(Debug, Clone, Copy)]
pub struct ColorSeeker {
    pub target: Rgb,
}

impl Default for ColorSeeker {
    fn default() -> Self {
        Self { target: palette::GOAL_LOW }
    }
}

fn centroid(pixels: &[u8], color: Rgb) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for (i, c) in pixels.chunks_exact(OBS_CHANNELS).enumerate() {
        if c == color {
            sx += (i % OBS_SIZE) as f64;
            sy += (i / OBS_SIZE) as f64;
            n += 1.0;
        }
    }
    (n > 0.0).then(|| (sx / n, sy / n))
}

impl SuiteActor for ColorSeeker {
    fn act(&mut self, pixels: &[u8], _rng: &mut Rng) -> Result<usize, EvalError> {
        let (Some(a), Some(t)) = (centroid(pixels, palette::AGENT), centroid(pixels, self.target)) else {
            return Ok(0);
        };
        let (dx, dy) = (t.0 - a.0, a.1 - t.1);
        let angle = dx.atan2(dy).rem_euclid(std::f64::consts::TAU);
        Ok((angle / std::f64::consts::FRAC_PI_4).round() as usize % NUM_ACTIONS)
    }
}
