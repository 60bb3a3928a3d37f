//! Deterministic test scenes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imageio::RasterImage;

pub const RED_BED_WIDTH: usize = 192;
pub const RED_BED_HEIGHT: usize = 144;
/// Iron-stained sandstone.
pub const RED: [f64; 3] = [0.72, 0.30, 0.22];
/// Bleached zone.
pub const WHITE: [f64; 3] = [0.92, 0.90, 0.88];
/// Iron-oxide concretion.
pub const DARK: [f64; 3] = [0.25, 0.12, 0.10];
pub const WHITE_PATCH: Patch = Patch {
    x: 130,
    y: 40,
    size: 8,
};
pub const DARK_PATCH: Patch = Patch {
    x: 50,
    y: 100,
    size: 4,
};

/// Square patch with its top-left corner at `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patch {
    pub x: usize,
    pub y: usize,
    pub size: usize,
}

impl Patch {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x..self.x + self.size).contains(&x) && (self.y..self.y + self.size).contains(&y)
    }

    /// Geometric center in pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        let half = (self.size as f64 - 1.0) / 2.0;
        (self.x as f64 + half, self.y as f64 + half)
    }
}

/// 192x144 red field with an 8x8 white patch and a 4x4 dark patch, plus
/// zero-mean Gaussian noise of standard deviation `noise` on every sample
/// (clamped to `[0, 1]`). `noise = 0` gives the clean scene.
pub fn red_bed(seed: u64, noise: f64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
    let mut data = Vec::with_capacity(RED_BED_WIDTH * RED_BED_HEIGHT * 3);
    for y in 0..RED_BED_HEIGHT {
        for x in 0..RED_BED_WIDTH {
            let color = if WHITE_PATCH.contains(x, y) {
                WHITE
            } else if DARK_PATCH.contains(x, y) {
                DARK
            } else {
                RED
            };
            for c in color {
                let v = if noise > 0.0 {
                    c + dist.sample(&mut rng)
                } else {
                    c
                };
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    RasterImage::new(RED_BED_WIDTH, RED_BED_HEIGHT, 3, data).expect("valid scene")
}
