//! Truncated Gaussian smoothing with border renormalization.
//!
//! The 2-D kernel is the outer product of a 1-D Gaussian truncated at radius
//! `ceil(3 sigma)`. At borders only the in-bounds weights are used and they
//! are renormalized to sum to one, so every output is a convex combination
//! of inputs. Both factors of that renormalization separate by axis, which
//! lets the filter run as a row pass followed by a column pass.

use crate::grid::Grid;

/// Kernel radius for a given standard deviation.
pub fn kernel_radius(sigma: f64) -> usize {
    if sigma <= 0.0 {
        0
    } else {
        (3.0 * sigma).ceil() as usize
    }
}

/// Unnormalized 1-D Gaussian weights for offsets `-r..=r`.
pub fn gaussian_weights(sigma: f64) -> Vec<f64> {
    let r = kernel_radius(sigma) as i64;
    if r == 0 {
        return vec![1.0];
    }
    let denom = 2.0 * sigma * sigma;
    (-r..=r)
        .map(|d| (-((d * d) as f64) / denom).exp())
        .collect()
}

fn smooth_line(src: &[f64], dst: &mut [f64], weights: &[f64]) {
    let r = weights.len() / 2;
    let n = src.len();
    for (i, out) in dst.iter_mut().enumerate() {
        let mut acc = weights[r] * src[i];
        let mut norm = weights[r];
        // pair the two sides so mirrored inputs give bitwise mirrored outputs
        for d in 1..=r {
            let w = weights[r + d];
            let left = (i >= d).then(|| src[i - d]);
            let right = (i + d < n).then(|| src[i + d]);
            let present = left.is_some() as u8 + right.is_some() as u8;
            if present == 0 {
                break;
            }
            acc += w * (left.unwrap_or(0.0) + right.unwrap_or(0.0));
            norm += w * f64::from(present);
        }
        *out = acc / norm;
    }
}

/// Smooth `grid` with an isotropic Gaussian of standard deviation `sigma`.
/// `sigma <= 0` returns a copy.
pub fn gaussian_smooth(grid: &Grid<f64>, sigma: f64) -> Grid<f64> {
    let (w, h) = (grid.width(), grid.height());
    if grid.is_empty() || kernel_radius(sigma) == 0 {
        return grid.clone();
    }
    let weights = gaussian_weights(sigma);

    let mut rows = Grid::filled(w, h, 0.0);
    for (src, dst) in grid
        .as_slice()
        .chunks_exact(w)
        .zip(rows.as_mut_slice().chunks_exact_mut(w))
    {
        smooth_line(src, dst, &weights);
    }

    let mut out = Grid::filled(w, h, 0.0);
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for (y, c) in col.iter_mut().enumerate() {
            *c = rows.get(x, y);
        }
        smooth_line(&col, &mut col_out, &weights);
        for (y, &v) in col_out.iter().enumerate() {
            out.set(x, y, v);
        }
    }
    out
}
