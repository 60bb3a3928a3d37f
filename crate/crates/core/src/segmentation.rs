//! Co-occurrence histogram segmentation of a single image plane.
//!
//! A plane is quantized to `G` gray levels and every 4-adjacent pixel pair
//! `(p, q)` is counted in a symmetric `G x G` histogram. Homogeneous regions
//! show up as peaks on the diagonal. After Gaussian smoothing, each strict
//! local maximum above a small mass threshold becomes a class seed, and every
//! histogram bin is attached to a seed by steepest-ascent hill climbing.
//!
//! Pixels are then classified by a vote over their adjacencies: each
//! neighbor `q` contributes the label of bin `(g(p), g(q))`. The majority
//! wins, ties go to the smaller label, and the final classes are renumbered
//! `1..=K` by descending pixel count. Label `0` marks noise (bins that climb
//! to a maximum that is not a seed).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::gaussian_smooth;
use crate::grid::Grid;

pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_SMOOTHING_SIGMA: f64 = 1.0;
pub const DEFAULT_MIN_FRACTION: f64 = 0.0001;
/// Largest supported quantization; keeps labels within `u16`.
pub const MAX_BINS: usize = 256;

/// Label for pixels that belong to no class.
pub const NOISE: u16 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentationParams {
    pub bins: usize,
    pub smoothing_sigma: f64,
    pub min_fraction: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            bins: DEFAULT_BINS,
            smoothing_sigma: DEFAULT_SMOOTHING_SIGMA,
            min_fraction: DEFAULT_MIN_FRACTION,
        }
    }
}

/// Symmetric gray-level pair counts over 4-adjacent pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceHistogram {
    bins: usize,
    counts: Vec<u64>,
    total_pairs: u64,
}

impl CooccurrenceHistogram {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn total_pairs(&self) -> u64 {
        self.total_pairs
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.counts[a * self.bins + b]
    }

    /// Row-major `G x G` counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    fn as_grid(&self) -> Grid<f64> {
        Grid::from_vec(
            self.bins,
            self.bins,
            self.counts.iter().map(|&c| c as f64).collect(),
        )
        .expect("square histogram")
    }
}

/// A histogram peak at `(row, col)` with its smoothed height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Peaks plus the smoothed histogram they were found on (needed again for
/// bin assignment).
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramPeaks {
    pub smoothed: Grid<f64>,
    pub peaks: Vec<Peak>,
}

/// Per-pixel class labels for one plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMap {
    /// `1..=K` by descending population, `0` for noise.
    pub labels: Grid<u16>,
    /// `populations[k - 1]` is the pixel count of class `k`.
    pub populations: Vec<usize>,
}

impl SegmentationMap {
    pub fn class_count(&self) -> usize {
        self.populations.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels
            .as_slice()
            .iter()
            .filter(|&&l| l == NOISE)
            .count()
    }

    /// Labels spread over 0..=255 for viewing.
    pub fn label_image(&self) -> Grid<u8> {
        let step = 255 / self.class_count().max(1);
        self.labels.map(|l| (usize::from(l) * step).min(255) as u8)
    }
}

/// Everything produced while segmenting one plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSegmentation {
    pub quantized: Grid<u16>,
    pub histogram: CooccurrenceHistogram,
    pub peaks: HistogramPeaks,
    pub map: SegmentationMap,
}

impl PlaneSegmentation {
    /// Smoothed histogram scaled to 0..=255 by its maximum, for viewing.
    pub fn histogram_image(&self) -> Grid<u8> {
        let max = self.peaks.smoothed.min_max().map_or(0.0, |(_, hi)| hi);
        self.peaks.smoothed.map(|v| {
            if max > 0.0 {
                (v / max * 255.0).round() as u8
            } else {
                0
            }
        })
    }
}

fn check_bins(bins: usize) -> Result<()> {
    if !(2..=MAX_BINS).contains(&bins) {
        return Err(Error::Contract(format!(
            "quantization bins must be in 2..={MAX_BINS}, got {bins}"
        )));
    }
    Ok(())
}

/// Map each sample `v` to `min(floor(v * G), G - 1)`.
pub fn quantize(plane: &Grid<f64>, bins: usize) -> Result<Grid<u16>> {
    check_bins(bins)?;
    let g = bins as f64;
    Ok(plane.map(|v| ((v * g).floor().max(0.0) as usize).min(bins - 1) as u16))
}

/// Count every in-bounds 4-neighbor pair in both orders.
pub fn build_cooccurrence(quantized: &Grid<u16>, bins: usize) -> Result<CooccurrenceHistogram> {
    check_bins(bins)?;
    if let Some(&bad) = quantized
        .as_slice()
        .iter()
        .find(|&&v| usize::from(v) >= bins)
    {
        return Err(Error::Contract(format!(
            "gray level {bad} outside 0..{bins}"
        )));
    }
    let mut counts = vec![0u64; bins * bins];
    let mut total_pairs = 0u64;
    let (w, h) = (quantized.width(), quantized.height());
    let mut add = |a: u16, b: u16| {
        let (a, b) = (usize::from(a), usize::from(b));
        counts[a * bins + b] += 1;
        counts[b * bins + a] += 1;
        total_pairs += 2;
    };
    for y in 0..h {
        for x in 0..w {
            let v = quantized.get(x, y);
            if x + 1 < w {
                add(v, quantized.get(x + 1, y));
            }
            if y + 1 < h {
                add(v, quantized.get(x, y + 1));
            }
        }
    }
    Ok(CooccurrenceHistogram {
        bins,
        counts,
        total_pairs,
    })
}

/// In-bounds 8-neighbors of `(row, col)` in row-major order.
fn neighbors8(row: usize, col: usize, n: usize) -> impl Iterator<Item = (usize, usize)> {
    (-1i64..=1)
        .flat_map(|dr| (-1i64..=1).map(move |dc| (dr, dc)))
        .filter(|&d| d != (0, 0))
        .filter_map(move |(dr, dc)| {
            let (r, c) = (row as i64 + dr, col as i64 + dc);
            (r >= 0 && c >= 0 && (r as usize) < n && (c as usize) < n)
                .then_some((r as usize, c as usize))
        })
}

/// Average with the transpose. The row and column passes round differently,
/// and mirrored bins must compare equal for peak detection.
fn symmetrize(mut g: Grid<f64>) -> Grid<f64> {
    let n = g.width();
    for a in 0..n {
        for b in a + 1..n {
            let v = 0.5 * (g.get(a, b) + g.get(b, a));
            g.set(a, b, v);
            g.set(b, a, v);
        }
    }
    g
}

/// Strict 8-neighborhood maxima of the smoothed histogram holding at least
/// `min_fraction` of all pairs, highest first, ties by `(row, col)`.
///
/// The histogram is symmetric, so a maximum just off the diagonal always
/// ties with its mirror bin. Mirror bins are therefore not compared against
/// each other, and each peak is reported once with `row <= col`.
pub fn find_histogram_peaks(
    hist: &CooccurrenceHistogram,
    smoothing_sigma: f64,
    min_fraction: f64,
) -> Result<HistogramPeaks> {
    if hist.total_pairs == 0 {
        return Err(Error::Degenerate(
            "co-occurrence histogram is empty (no adjacent pixel pairs)".into(),
        ));
    }
    if smoothing_sigma.is_nan()
        || smoothing_sigma < 0.0
        || min_fraction.is_nan()
        || min_fraction < 0.0
    {
        return Err(Error::Contract(
            "smoothing sigma and min fraction must be non-negative".into(),
        ));
    }
    let n = hist.bins;
    let smoothed = symmetrize(gaussian_smooth(&hist.as_grid(), smoothing_sigma));
    let threshold = min_fraction * hist.total_pairs as f64;
    let mut peaks = Vec::new();
    for row in 0..n {
        for col in 0..n {
            let value = smoothed.get(col, row);
            if value < threshold || value <= 0.0 {
                continue;
            }
            // (col, row) holds the same pairs as (row, col); it is not a rival
            // neighbor, and only the upper-triangle copy is reported
            if row > col {
                continue;
            }
            if neighbors8(row, col, n)
                .filter(|&(r, c)| (r, c) != (col, row))
                .all(|(r, c)| smoothed.get(c, r) < value)
            {
                peaks.push(Peak { row, col, value });
            }
        }
    }
    // row-major scan order already holds the tie-break; stable sort keeps it
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(HistogramPeaks { smoothed, peaks })
}

/// Label every histogram bin with the 1-based id of the peak its
/// steepest-ascent path ends on, or `NOISE`.
fn assign_bins(peaks: &HistogramPeaks) -> Vec<u16> {
    let smoothed = &peaks.smoothed;
    let n = smoothed.width();
    let mut peak_id = vec![NOISE; n * n];
    for (i, p) in peaks.peaks.iter().enumerate() {
        peak_id[p.row * n + p.col] = (i + 1) as u16;
        peak_id[p.col * n + p.row] = (i + 1) as u16;
    }
    // one step uphill, or itself at a local maximum
    let next: Vec<usize> = (0..n * n)
        .map(|b| {
            let (row, col) = (b / n, b % n);
            let mut best = b;
            let mut best_val = smoothed.get(col, row);
            for (r, c) in neighbors8(row, col, n) {
                let v = smoothed.get(c, r);
                if v > best_val {
                    best = r * n + c;
                    best_val = v;
                }
            }
            best
        })
        .collect();
    // paths strictly increase, so following `next` terminates
    let mut label: Vec<Option<u16>> = vec![None; n * n];
    let mut path = Vec::new();
    for start in 0..n * n {
        let mut b = start;
        while label[b].is_none() && next[b] != b {
            path.push(b);
            b = next[b];
        }
        let l = label[b].unwrap_or(peak_id[b]);
        label[b] = Some(l);
        for p in path.drain(..) {
            label[p] = Some(l);
        }
    }
    label.into_iter().map(|l| l.unwrap_or(NOISE)).collect()
}

/// Classify pixels by majority vote over their adjacency bins and renumber
/// classes by descending population.
pub fn classify_pixels(
    quantized: &Grid<u16>,
    hist: &CooccurrenceHistogram,
    peaks: &HistogramPeaks,
) -> Result<SegmentationMap> {
    if peaks.peaks.is_empty() {
        return Err(Error::Degenerate("no histogram peaks found".into()));
    }
    let n = hist.bins;
    if peaks.smoothed.width() != n || peaks.smoothed.height() != n {
        return Err(Error::Contract(
            "peaks were computed for a different histogram size".into(),
        ));
    }
    if let Some(&bad) = quantized.as_slice().iter().find(|&&v| usize::from(v) >= n) {
        return Err(Error::Contract(format!("gray level {bad} outside 0..{n}")));
    }
    let bin_label = assign_bins(peaks);
    let (w, h) = (quantized.width(), quantized.height());
    let mut raw = Grid::filled(w, h, NOISE);
    let mut counts = vec![0usize; peaks.peaks.len() + 1];
    let mut votes: Vec<u16> = Vec::with_capacity(4);
    for y in 0..h {
        for x in 0..w {
            let g = usize::from(quantized.get(x, y));
            votes.clear();
            let mut vote = |qx: usize, qy: usize| {
                votes.push(bin_label[g * n + usize::from(quantized.get(qx, qy))]);
            };
            if x > 0 {
                vote(x - 1, y);
            }
            if x + 1 < w {
                vote(x + 1, y);
            }
            if y > 0 {
                vote(x, y - 1);
            }
            if y + 1 < h {
                vote(x, y + 1);
            }
            let winner = majority(&votes);
            raw.set(x, y, winner);
            counts[usize::from(winner)] += 1;
        }
    }

    let mut order: Vec<usize> = (1..counts.len()).filter(|&id| counts[id] > 0).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut remap = vec![NOISE; counts.len()];
    for (rank, &id) in order.iter().enumerate() {
        remap[id] = (rank + 1) as u16;
    }
    Ok(SegmentationMap {
        labels: raw.map(|l| remap[usize::from(l)]),
        populations: order.iter().map(|&id| counts[id]).collect(),
    })
}

/// Most frequent label; ties go to the smaller label. An empty ballot is noise.
fn majority(votes: &[u16]) -> u16 {
    let mut best = NOISE;
    let mut best_count = 0;
    for &v in votes {
        let c = votes.iter().filter(|&&u| u == v).count();
        if c > best_count || (c == best_count && v < best) {
            best = v;
            best_count = c;
        }
    }
    best
}

/// Quantize, histogram, find peaks and classify one plane.
pub fn segment_plane(plane: &Grid<f64>, params: &SegmentationParams) -> Result<PlaneSegmentation> {
    let quantized = quantize(plane, params.bins)?;
    let histogram = build_cooccurrence(&quantized, params.bins)?;
    let peaks = find_histogram_peaks(&histogram, params.smoothing_sigma, params.min_fraction)?;
    let map = classify_pixels(&quantized, &histogram, &peaks)?;
    Ok(PlaneSegmentation {
        quantized,
        histogram,
        peaks,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_u16(w: usize, h: usize, v: &[u16]) -> Grid<u16> {
        Grid::from_vec(w, h, v.to_vec()).unwrap()
    }

    fn halves(w: usize, h: usize, split: usize, lo: f64, hi: f64) -> Grid<f64> {
        Grid::from_fn(w, h, |x, _| if x < split { lo } else { hi })
    }

    // --- oracles ---------------------------------------------------------

    fn enumerate_pairs(q: &Grid<u16>, bins: usize) -> Vec<u64> {
        let mut out = vec![0u64; bins * bins];
        let (w, h) = (q.width() as i64, q.height() as i64);
        // every ordered pair of 4-neighbors, visited from both ends
        for y in 0..h {
            for x in 0..w {
                for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h {
                        let a = q.get(x as usize, y as usize) as usize;
                        let b = q.get(nx as usize, ny as usize) as usize;
                        out[a * bins + b] += 1;
                    }
                }
            }
        }
        out
    }

    fn direct_smooth(counts: &[u64], n: usize, sigma: f64) -> Vec<f64> {
        let r = (3.0 * sigma).ceil() as i64;
        let mut out = vec![0.0; n * n];
        for row in 0..n as i64 {
            for col in 0..n as i64 {
                let (mut acc, mut norm) = (0.0, 0.0);
                for dr in -r..=r {
                    for dc in -r..=r {
                        let (rr, cc) = (row + dr, col + dc);
                        if rr < 0 || cc < 0 || rr >= n as i64 || cc >= n as i64 {
                            continue;
                        }
                        let wgt = (-((dr * dr + dc * dc) as f64) / (2.0 * sigma * sigma)).exp();
                        acc += wgt * counts[(rr * n as i64 + cc) as usize] as f64;
                        norm += wgt;
                    }
                }
                out[(row * n as i64 + col) as usize] = acc / norm;
            }
        }
        out
    }

    /// Exhaustive scan of every bin of a smoothed histogram.
    fn brute_force_peaks(h: &CooccurrenceHistogram, s: &[f64], frac: f64) -> Vec<(usize, usize)> {
        let n = h.bins();
        let mut found = Vec::new();
        for row in 0..n {
            for col in 0..n {
                let v = s[row * n + col];
                if row > col || v <= 0.0 || v < frac * h.total_pairs() as f64 {
                    continue;
                }
                let mut strict = true;
                for r in row.saturating_sub(1)..=(row + 1).min(n - 1) {
                    for c in col.saturating_sub(1)..=(col + 1).min(n - 1) {
                        if (r, c) != (row, col) && (r, c) != (col, row) && s[r * n + c] >= v {
                            strict = false;
                        }
                    }
                }
                if strict {
                    found.push((v, row, col));
                }
            }
        }
        found.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        found.into_iter().map(|(_, r, c)| (r, c)).collect()
    }

    // --- quantize ----------------------------------------------------------

    #[test]
    fn quantize_endpoints() {
        let plane = Grid::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(quantize(&plane, 64).unwrap().as_slice(), &[0, 63]);
        let half = Grid::from_vec(1, 1, vec![0.5]).unwrap();
        assert_eq!(quantize(&half, 2).unwrap().as_slice(), &[1]);
    }

    #[test]
    fn quantize_rejects_single_bin() {
        let plane = Grid::filled(1, 1, 0.5);
        assert!(matches!(quantize(&plane, 1), Err(Error::Contract(_))));
    }

    #[test]
    fn quantized_histogram_matches_direct_binning() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let plane = Grid::from_fn(50, 40, |_, _| rng.random::<f64>());
        let q = quantize(&plane, 64).unwrap();
        let mut ours = [0usize; 64];
        for &v in q.as_slice() {
            ours[v as usize] += 1;
        }
        let mut oracle = [0usize; 64];
        for &v in plane.as_slice() {
            // bin i covers [i/64, (i+1)/64)
            let bin = (0..64).find(|&i| v < (i + 1) as f64 / 64.0).unwrap_or(63);
            oracle[bin] += 1;
        }
        assert_eq!(ours, oracle);
    }

    // --- co-occurrence -----------------------------------------------------

    #[test]
    fn cooccurrence_of_small_grid() {
        let q = grid_u16(2, 2, &[0, 0, 0, 3]);
        let h = build_cooccurrence(&q, 4).unwrap();
        assert_eq!(h.get(0, 0), 4);
        assert_eq!(h.get(0, 3), 2);
        assert_eq!(h.get(3, 0), 2);
        assert_eq!(h.total_pairs(), 8);
        assert_eq!(h.counts().iter().sum::<u64>(), 8);
    }

    #[test]
    fn constant_grid_fills_only_the_diagonal_bin() {
        let q = Grid::filled(7, 5, 9u16);
        let h = build_cooccurrence(&q, 16).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(h.get(a, b) > 0, (a, b) == (9, 9));
            }
        }
        // 6*5 horizontal + 7*4 vertical adjacencies
        assert_eq!(h.total_pairs(), 2 * (30 + 28));
    }

    #[test]
    fn single_pixel_has_no_pairs() {
        let h = build_cooccurrence(&Grid::filled(1, 1, 0u16), 4).unwrap();
        assert_eq!(h.total_pairs(), 0);
        assert!(h.counts().iter().all(|&c| c == 0));
        assert!(matches!(
            find_histogram_peaks(&h, 1.0, 0.001),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn out_of_range_level_is_rejected() {
        let q = grid_u16(2, 1, &[0, 4]);
        assert!(matches!(build_cooccurrence(&q, 4), Err(Error::Contract(_))));
    }

    // --- peaks ---------------------------------------------------------------

    #[test]
    fn constant_image_has_one_peak_on_its_level() {
        let q = Grid::filled(10, 10, 20u16);
        let h = build_cooccurrence(&q, 64).unwrap();
        let p = find_histogram_peaks(&h, 1.0, 0.001).unwrap();
        assert_eq!(p.peaks.len(), 1);
        assert_eq!((p.peaks[0].row, p.peaks[0].col), (20, 20));
    }

    #[test]
    fn off_diagonal_cluster_is_found_despite_mirror_tie() {
        // checkerboard of levels 5 and 6: every pair is (5,6) or (6,5)
        let q = Grid::from_fn(10, 10, |x, y| if (x + y) % 2 == 0 { 5u16 } else { 6 });
        let h = build_cooccurrence(&q, 16).unwrap();
        assert_eq!(h.get(5, 6), h.get(6, 5));
        let p = find_histogram_peaks(&h, 1.0, 0.001).unwrap();
        assert_eq!(p.peaks.len(), 1);
        assert_eq!((p.peaks[0].row, p.peaks[0].col), (5, 6));
        let map = classify_pixels(&q, &h, &p).unwrap();
        assert_eq!(map.populations, vec![100]);
    }

    #[test]
    fn black_white_halves_peak_at_both_corners() {
        let q = quantize(&halves(8, 8, 4, 0.0, 1.0), 64).unwrap();
        let h = build_cooccurrence(&q, 64).unwrap();
        let p = find_histogram_peaks(&h, 1.0, 0.001).unwrap();
        let coords: Vec<_> = p.peaks.iter().map(|p| (p.row, p.col)).collect();
        assert_eq!(coords, brute_force_peaks(&h, p.smoothed.as_slice(), 0.001));
        // both halves have equal mass: corner tie broken by (row, col)
        assert_eq!(&coords[..2], &[(0, 0), (63, 63)]);
    }

    #[test]
    fn peaks_match_brute_force_on_random_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (w, h) = (rng.random_range(2..24), rng.random_range(2..24));
            let levels = rng.random_range(2..6);
            let centers: Vec<f64> = (0..levels).map(|_| rng.random()).collect();
            let plane = Grid::from_fn(w, h, |_, _| {
                let c = centers[rng.random_range(0..levels)];
                (c + rng.random_range(-0.02..0.02f64)).clamp(0.0, 1.0)
            });
            let q = quantize(&plane, 32).unwrap();
            let hist = build_cooccurrence(&q, 32).unwrap();
            let p = find_histogram_peaks(&hist, 1.0, 0.001).unwrap();
            let coords: Vec<_> = p.peaks.iter().map(|p| (p.row, p.col)).collect();
            assert_eq!(
                coords,
                brute_force_peaks(&hist, p.smoothed.as_slice(), 0.001)
            );
            let direct = direct_smooth(hist.counts(), 32, 1.0);
            for (a, b) in p.smoothed.as_slice().iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }

    // --- classification ------------------------------------------------------

    #[test]
    fn constant_image_is_one_class() {
        let seg = segment_plane(&Grid::filled(12, 9, 0.4), &SegmentationParams::default()).unwrap();
        assert_eq!(seg.map.populations, vec![108]);
        assert!(seg.map.labels.as_slice().iter().all(|&l| l == 1));
    }

    #[test]
    fn binary_halves_split_into_two_classes() {
        // 5x4: three columns of 0, two columns of 1. With G = 4 the two
        // diagonal peaks (0,0) and (3,3) are not adjacent histogram bins.
        let params = SegmentationParams {
            bins: 4,
            ..SegmentationParams::default()
        };
        let seg = segment_plane(&halves(5, 4, 3, 0.0, 1.0), &params).unwrap();
        assert_eq!(seg.map.populations, vec![12, 8]);
        for y in 0..4 {
            for x in 0..5 {
                let expected = if x < 3 { 1 } else { 2 };
                assert_eq!(seg.map.labels.get(x, y), expected, "({x}, {y})");
            }
        }
    }

    #[test]
    fn equal_halves_keep_peak_order() {
        let params = SegmentationParams {
            bins: 4,
            ..SegmentationParams::default()
        };
        let seg = segment_plane(&halves(4, 4, 2, 0.0, 1.0), &params).unwrap();
        assert_eq!(seg.map.populations, vec![8, 8]);
        // peak (0,0) precedes (3,3) on ties, so the dark half is class 1
        assert_eq!(seg.map.labels.get(0, 0), 1);
        assert_eq!(seg.map.labels.get(3, 3), 2);
    }

    #[test]
    fn two_level_quantization_cannot_separate_halves() {
        // every pair of bins in a 2x2 histogram is 8-adjacent, so at most one
        // strict maximum exists; equal halves tie and leave none
        let params = SegmentationParams {
            bins: 2,
            ..SegmentationParams::default()
        };
        assert!(matches!(
            segment_plane(&halves(4, 4, 2, 0.0, 1.0), &params),
            Err(Error::Degenerate(_))
        ));
        let seg = segment_plane(&halves(4, 4, 3, 0.0, 1.0), &params).unwrap();
        assert_eq!(seg.peaks.peaks.len(), 1);
        assert_eq!(seg.map.class_count(), 1);
    }

    #[test]
    fn no_peaks_is_degenerate() {
        let q = Grid::filled(3, 3, 0u16);
        let h = build_cooccurrence(&q, 4).unwrap();
        let empty = HistogramPeaks {
            smoothed: Grid::filled(4, 4, 0.0),
            peaks: vec![],
        };
        assert!(matches!(
            classify_pixels(&q, &h, &empty),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn majority_ties_prefer_smaller_label() {
        assert_eq!(majority(&[2, 1]), 1);
        assert_eq!(majority(&[3, 2, 2, 3]), 2);
        assert_eq!(majority(&[3, 3, 1]), 3);
        assert_eq!(majority(&[0, 4]), 0);
        assert_eq!(majority(&[]), NOISE);
    }

    #[test]
    fn bins_climb_to_their_peak() {
        let q = quantize(&halves(8, 8, 4, 0.1, 0.9), 16).unwrap();
        let h = build_cooccurrence(&q, 16).unwrap();
        let p = find_histogram_peaks(&h, 1.0, 0.001).unwrap();
        let labels = assign_bins(&p);
        for (i, peak) in p.peaks.iter().enumerate() {
            assert_eq!(labels[peak.row * 16 + peak.col] as usize, i + 1);
        }
    }

    // --- properties ----------------------------------------------------------

    fn plane_strategy() -> impl Strategy<Value = Grid<f64>> {
        (
            2usize..20,
            2usize..20,
            prop::collection::vec(0.0f64..=1.0, 4),
            any::<u64>(),
        )
            .prop_map(|(w, h, centers, seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // blocky planes so segmentation has structure to find
                let bw = rng.random_range(1..=w);
                Grid::from_fn(w, h, |x, y| {
                    let c = centers[((x / bw) + y / 3) % centers.len()];
                    (c + rng.random_range(-0.01..0.01f64)).clamp(0.0, 1.0)
                })
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cooccurrence_matches_pair_enumeration(plane in plane_strategy()) {
            let q = quantize(&plane, 16).unwrap();
            let h = build_cooccurrence(&q, 16).unwrap();
            prop_assert_eq!(h.counts(), &enumerate_pairs(&q, 16)[..]);
            let (w, hh) = (q.width() as u64, q.height() as u64);
            prop_assert_eq!(h.total_pairs(), 2 * ((w - 1) * hh + w * (hh - 1)));
        }

        #[test]
        fn segmentation_is_transpose_and_flip_consistent(plane in plane_strategy()) {
            let params = SegmentationParams { bins: 16, ..SegmentationParams::default() };
            let seg = segment_plane(&plane, &params);
            let flipped = segment_plane(&plane.flip_horizontal(), &params);
            let transposed = segment_plane(&plane.transpose(), &params);
            match (seg, flipped, transposed) {
                (Ok(a), Ok(b), Ok(c)) => {
                    prop_assert_eq!(&a.histogram, &b.histogram);
                    prop_assert_eq!(&a.histogram, &c.histogram);
                    prop_assert_eq!(&a.map.populations, &c.map.populations);
                    prop_assert_eq!(&a.map.populations, &b.map.populations);
                    prop_assert_eq!(a.map.labels.flip_horizontal(), b.map.labels);
                }
                (Err(_), Err(_), Err(_)) => {}
                _ => prop_assert!(false, "degeneracy differs between orientations"),
            }
        }

        #[test]
        fn populations_are_consistent(plane in plane_strategy()) {
            if let Ok(seg) = segment_plane(&plane, &SegmentationParams::default()) {
                let m = &seg.map;
                prop_assert!(m.populations.windows(2).all(|w| w[0] >= w[1]));
                prop_assert!(m.populations.iter().all(|&p| p > 0));
                prop_assert_eq!(
                    m.populations.iter().sum::<usize>() + m.noise_count(),
                    plane.len()
                );
                for (k, &pop) in m.populations.iter().enumerate() {
                    let count = m.labels.as_slice().iter().filter(|&&l| l as usize == k + 1).count();
                    prop_assert_eq!(count, pop);
                }
            }
        }

        #[test]
        fn bin_preserving_recolor_keeps_segmentation(plane in plane_strategy()) {
            let g = 16.0;
            // strictly increasing within each bin, fixes every bin boundary
            let recolored = plane.map(|v| {
                let b = (v * g).floor().min(g - 1.0);
                let frac = v * g - b;
                (b + frac * frac) / g
            });
            let params = SegmentationParams { bins: 16, ..SegmentationParams::default() };
            let a = segment_plane(&plane, &params).ok().map(|s| s.map);
            let b = segment_plane(&recolored, &params).ok().map(|s| s.map);
            prop_assert_eq!(a, b);
        }
    }
}
