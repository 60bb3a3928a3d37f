//! RGB to hue/saturation/intensity planes (triangle model).
//!
//! `I = (R + G + B) / 3`, `S = 1 - min(R, G, B) / I`, and hue is the angle of
//! the chromatic component measured from the red axis, stored as a fraction
//! of a full turn in `[0, 1)`. Achromatic and black pixels get `H = 0`.
//!
//! Hue is later quantized linearly, so reds close to the wrap point can land
//! in the first and last hue bins.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imageio::RasterImage;

/// Hue, saturation and intensity of one image, each in `[0, 1]` (hue `< 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct HsiPlanes {
    pub hue: Grid<f64>,
    pub saturation: Grid<f64>,
    pub intensity: Grid<f64>,
}

impl HsiPlanes {
    /// Planes in pipeline channel order (H, S, I).
    pub fn planes(&self) -> [&Grid<f64>; 3] {
        [&self.hue, &self.saturation, &self.intensity]
    }
}

/// Convert one RGB triplet to `(h, s, i)`.
pub fn rgb_to_hsi_pixel(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let sum = r + g + b;
    let intensity = (sum / 3.0).clamp(0.0, 1.0);
    let min = r.min(g).min(b);
    let max = r.max(g).max(b);
    if intensity == 0.0 || min == max {
        return (0.0, 0.0, intensity);
    }
    // min / mean, written with the sum to avoid an extra rounding
    let saturation = (1.0 - 3.0 * min / sum).clamp(0.0, 1.0);
    // Equivalent to acos(((r-g)+(r-b)) / (2 sqrt((r-g)^2 + (r-b)(g-b)))) with
    // the lower half-plane reflected, but well conditioned everywhere.
    let angle = (3f64.sqrt() * (g - b)).atan2(2.0 * r - g - b);
    let mut hue = angle / TAU;
    if hue < 0.0 {
        hue += 1.0;
    }
    if hue >= 1.0 {
        hue = 0.0;
    }
    (hue, saturation, intensity)
}

pub fn rgb_to_hsi(img: &RasterImage) -> Result<HsiPlanes> {
    if img.channels() != 3 {
        return Err(Error::Contract(format!(
            "HSI conversion needs 3 channels, got {}",
            img.channels()
        )));
    }
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let (mut hue, mut sat, mut int) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for px in img.data().chunks_exact(3) {
        let (hh, ss, ii) = rgb_to_hsi_pixel(px[0], px[1], px[2]);
        hue.push(hh);
        sat.push(ss);
        int.push(ii);
    }
    Ok(HsiPlanes {
        hue: Grid::from_vec(w, h, hue).expect("shape"),
        saturation: Grid::from_vec(w, h, sat).expect("shape"),
        intensity: Grid::from_vec(w, h, int).expect("shape"),
    })
}
