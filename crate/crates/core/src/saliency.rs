//! Uncommon maps, interest maps and interest points.
//!
//! Each HSI plane is segmented on its own. Classes are ranked by pixel
//! count, and a pixel's uncommonness is its class rank: 1 for the most common
//! class up to 8 for the eighth. Rarer classes (and unassigned pixels) are
//! treated as noise and contribute 0. The three per-channel maps are summed
//! into the raw interest map (integer, at most 24), which is then blurred so
//! that clusters of uncommon pixels outweigh isolated ones.
//!
//! Interest points are picked greedily from the blurred map, and also from
//! the raw map for reference; only the blurred-scale points are reported.

use serde::Serialize;

use crate::color::{rgb_to_hsi, HsiPlanes};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::filter::gaussian_smooth;
use crate::grid::Grid;
use crate::imageio::RasterImage;
use crate::segmentation::{segment_plane, PlaneSegmentation, SegmentationMap};

/// Classes beyond this rank are noise.
pub const MAX_UNCOMMON_CLASSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Hue,
    Saturation,
    Intensity,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Hue, Channel::Saturation, Channel::Intensity];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Hue => "hue",
            Channel::Saturation => "saturation",
            Channel::Intensity => "intensity",
        }
    }
}

/// Per-pixel uncommonness, 0 (noise) or 1..=8.
#[derive(Debug, Clone, PartialEq)]
pub struct UncommonMap {
    pub values: Grid<u8>,
}

/// Sum of the three uncommon maps and its smoothed version.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestMap {
    pub raw: Grid<u8>,
    pub blurred: Grid<f64>,
    pub blur_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterestPoint {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

/// Points in selection order, highest score first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointList {
    pub points: Vec<InterestPoint>,
    /// The map had no structure (all values equal).
    pub degenerate: bool,
    /// Whether these points are shown to the operator.
    pub reported: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterestPointSet {
    /// Points on the blurred map (the reported ones).
    pub blurred: PointList,
    /// Points on the unblurred map, kept for reference.
    pub raw: PointList,
    pub suppression_radius: f64,
}

/// Rank each pixel by its class: class `k <= max_classes` maps to `k`,
/// everything else to 0.
pub fn uncommon_map(seg: &SegmentationMap, max_classes: usize) -> Result<UncommonMap> {
    if !(1..=MAX_UNCOMMON_CLASSES).contains(&max_classes) {
        return Err(Error::Contract(format!(
            "max classes must be in 1..={MAX_UNCOMMON_CLASSES}, got {max_classes}"
        )));
    }
    if seg.populations.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Contract(
            "segmentation classes are not ordered by descending population".into(),
        ));
    }
    let values = seg.labels.map(|l| {
        let l = usize::from(l);
        if l <= max_classes {
            l as u8
        } else {
            0
        }
    });
    Ok(UncommonMap { values })
}

/// Pointwise sum of the hue, saturation and intensity uncommon maps.
pub fn fuse_interest(hue: &UncommonMap, sat: &UncommonMap, int: &UncommonMap) -> Result<Grid<u8>> {
    if !hue.values.same_shape(&sat.values) || !hue.values.same_shape(&int.values) {
        return Err(Error::Contract("uncommon maps differ in size".into()));
    }
    let data = hue
        .values
        .as_slice()
        .iter()
        .zip(sat.values.as_slice())
        .zip(int.values.as_slice())
        .map(|((&h, &s), &i)| h + s + i)
        .collect();
    Ok(Grid::from_vec(hue.values.width(), hue.values.height(), data).expect("shape"))
}

/// Blur with a Gaussian of standard deviation `blur_width / 2`.
pub fn blur_interest(raw: &Grid<u8>, blur_width: f64) -> Result<Grid<f64>> {
    if blur_width.is_nan() || blur_width < 1.0 {
        return Err(Error::Contract(format!(
            "blur width must be at least 1, got {blur_width}"
        )));
    }
    blur_interest_sigma(raw, blur_width / 2.0)
}

/// Blur with an explicit standard deviation. Outputs are clamped to the
/// input range so rounding cannot leave it.
pub fn blur_interest_sigma(raw: &Grid<u8>, sigma: f64) -> Result<Grid<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Contract(format!(
            "blur sigma must be positive, got {sigma}"
        )));
    }
    let Some((lo, hi)) = raw.min_max() else {
        return Ok(Grid::filled(raw.width(), raw.height(), 0.0));
    };
    let (lo, hi) = (f64::from(lo), f64::from(hi));
    let blurred = gaussian_smooth(&raw.map(f64::from), sigma);
    Ok(blurred.map(|v| v.clamp(lo, hi)))
}

/// Greedy top-`k` selection: take the maximum (ties to the smallest row,
/// then column), drop everything closer than `suppression_radius`, repeat.
pub fn extract_points(map: &Grid<f64>, k: usize, suppression_radius: f64) -> Result<PointList> {
    if map.is_empty() {
        return Err(Error::Contract(
            "cannot extract points from an empty map".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Contract("k must be at least 1".into()));
    }
    if suppression_radius.is_nan() || suppression_radius < 0.0 {
        return Err(Error::Contract(
            "suppression radius must be non-negative".into(),
        ));
    }
    let (w, h) = (map.width(), map.height());
    let (lo, hi) = map.min_max().expect("non-empty");
    let r2 = suppression_radius * suppression_radius;
    let reach = suppression_radius.ceil() as i64;
    let mut excluded = vec![false; w * h];
    let mut points = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in map.as_slice().iter().enumerate() {
            if !excluded[i] && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        let Some((i, score)) = best else { break };
        let (x, y) = (i % w, i / w);
        points.push(InterestPoint { x, y, score });
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (px, py) = (x as i64 + dx, y as i64 + dy);
                if px < 0 || py < 0 || px >= w as i64 || py >= h as i64 {
                    continue;
                }
                if ((dx * dx + dy * dy) as f64) < r2 {
                    excluded[py as usize * w + px as usize] = true;
                }
            }
        }
        // a zero radius still consumes the chosen pixel
        excluded[i] = true;
    }
    Ok(PointList {
        points,
        degenerate: lo == hi,
        reported: true,
    })
}

/// Everything computed for one image.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub hsi: HsiPlanes,
    /// `None` where the channel was degenerate.
    pub segmentations: [Option<PlaneSegmentation>; 3],
    pub uncommon: [UncommonMap; 3],
    pub interest: InterestMap,
    pub points: InterestPointSet,
    pub warnings: Vec<String>,
}

impl Analysis {
    /// Number of classes found per channel (0 for degenerate channels).
    pub fn class_counts(&self) -> [usize; 3] {
        [0, 1, 2].map(|c| {
            self.segmentations[c]
                .as_ref()
                .map_or(0, |s| s.map.class_count())
        })
    }
}

fn channel_uncommon(
    plane: &Grid<f64>,
    channel: Channel,
    config: &PipelineConfig,
) -> Result<(Option<PlaneSegmentation>, UncommonMap, Option<String>)> {
    match segment_plane(plane, &config.segmentation()) {
        Ok(seg) => {
            let map = uncommon_map(&seg.map, config.max_classes)?;
            Ok((Some(seg), map, None))
        }
        Err(Error::Degenerate(why)) => Ok((
            None,
            UncommonMap {
                values: Grid::filled(plane.width(), plane.height(), 0),
            },
            Some(format!("{} channel degenerate: {why}", channel.name())),
        )),
        Err(e) => Err(e),
    }
}

/// Run the full pipeline on an already preprocessed RGB image.
pub fn analyze(img: &RasterImage, config: &PipelineConfig) -> Result<Analysis> {
    config.validate()?;
    let hsi = rgb_to_hsi(img)?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Dimension("image has no pixels".into()));
    }
    let planes = hsi.planes();
    // channels are independent; results are collected in H, S, I order
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = Channel::ALL
            .iter()
            .zip(planes)
            .map(|(&ch, plane)| scope.spawn(move || channel_uncommon(plane, ch, config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("channel worker panicked"))
            .collect()
    });
    let mut segmentations = [None, None, None];
    let mut uncommon = Vec::with_capacity(3);
    let mut warnings = Vec::new();
    for (c, result) in results.into_iter().enumerate() {
        let (seg, map, warning) = result?;
        segmentations[c] = seg;
        uncommon.push(map);
        warnings.extend(warning);
    }
    let uncommon: [UncommonMap; 3] = uncommon.try_into().expect("three channels");

    let raw = fuse_interest(&uncommon[0], &uncommon[1], &uncommon[2])?;
    let blurred = blur_interest_sigma(&raw, config.interest_sigma())?;
    let blurred_points = extract_points(&blurred, config.top_k, config.suppression_radius)?;
    let mut raw_points =
        extract_points(&raw.map(f64::from), config.top_k, config.suppression_radius)?;
    raw_points.reported = false;

    Ok(Analysis {
        hsi,
        segmentations,
        uncommon,
        interest: InterestMap {
            raw,
            blurred,
            blur_width: config.blur_width,
        },
        points: InterestPointSet {
            blurred: blurred_points,
            raw: raw_points,
            suppression_radius: config.suppression_radius,
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seg(labels: Vec<u16>, w: usize, h: usize) -> SegmentationMap {
        let max = labels.iter().copied().max().unwrap_or(0) as usize;
        let mut populations = vec![0; max];
        for &l in &labels {
            if l > 0 {
                populations[l as usize - 1] += 1;
            }
        }
        SegmentationMap {
            labels: Grid::from_vec(w, h, labels).unwrap(),
            populations,
        }
    }

    fn u(values: Vec<u8>, w: usize, h: usize) -> UncommonMap {
        UncommonMap {
            values: Grid::from_vec(w, h, values).unwrap(),
        }
    }

    /// Direct 2-D convolution over the square window, renormalized per pixel.
    fn direct_blur(raw: &Grid<u8>, sigma: f64) -> Vec<f64> {
        let r = (3.0 * sigma).ceil() as i64;
        let (w, h) = (raw.width() as i64, raw.height() as i64);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut norm) = (0.0, 0.0);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (px, py) = (x + dx, y + dy);
                        if px < 0 || py < 0 || px >= w || py >= h {
                            continue;
                        }
                        let wt = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
                        acc += wt * f64::from(raw.get(px as usize, py as usize));
                        norm += wt;
                    }
                }
                out.push(acc / norm);
            }
        }
        out
    }

    /// Naive greedy selection: checks distance against every chosen point.
    fn brute_force_greedy(map: &Grid<f64>, k: usize, radius: f64) -> Vec<(usize, usize, f64)> {
        let mut chosen: Vec<(usize, usize, f64)> = Vec::new();
        while chosen.len() < k {
            let mut best: Option<(usize, usize, f64)> = None;
            for y in 0..map.height() {
                for x in 0..map.width() {
                    let blocked = chosen.iter().any(|&(cx, cy, _)| {
                        let d = ((cx as f64 - x as f64).powi(2) + (cy as f64 - y as f64).powi(2))
                            .sqrt();
                        d < radius || (cx, cy) == (x, y)
                    });
                    let v = map.get(x, y);
                    if !blocked && best.is_none_or(|b| v > b.2) {
                        best = Some((x, y, v));
                    }
                }
            }
            match best {
                Some(b) => chosen.push(b),
                None => break,
            }
        }
        chosen
    }

    // --- uncommon maps -------------------------------------------------------

    #[test]
    fn ranks_become_uncommonness() {
        // populations 100, 50, 10
        let mut labels = vec![1u16; 100];
        labels.extend(vec![2; 50]);
        labels.extend(vec![3; 10]);
        let map = uncommon_map(&seg(labels.clone(), 160, 1), 8).unwrap();
        assert_eq!(
            map.values.as_slice(),
            &labels.iter().map(|&l| l as u8).collect::<Vec<_>>()[..]
        );
    }

    #[test]
    fn ninth_and_tenth_classes_are_noise() {
        let mut labels = Vec::new();
        for class in 1..=10u16 {
            labels.extend(vec![class; 20 - class as usize]);
        }
        let n = labels.len();
        let map = uncommon_map(&seg(labels.clone(), n, 1), 8).unwrap();
        for (l, v) in labels.iter().zip(map.values.as_slice()) {
            let expected = if *l >= 9 { 0 } else { *l as u8 };
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn single_class_is_all_common() {
        let map = uncommon_map(&seg(vec![1; 12], 4, 3), 8).unwrap();
        assert!(map.values.as_slice().iter().all(|&v| v == 1));
    }

    #[test]
    fn unordered_populations_are_rejected() {
        let s = SegmentationMap {
            labels: Grid::from_vec(3, 1, vec![1, 2, 2]).unwrap(),
            populations: vec![1, 2],
        };
        assert!(matches!(uncommon_map(&s, 8), Err(Error::Contract(_))));
    }

    // --- fusion ----------------------------------------------------------------

    #[test]
    fn ones_fuse_to_three() {
        let one = u(vec![1; 6], 3, 2);
        let raw = fuse_interest(&one, &one, &one).unwrap();
        assert!(raw.as_slice().iter().all(|&v| v == 3));
    }

    #[test]
    fn eights_fuse_to_the_maximum() {
        let mut v = vec![1u8; 4];
        v[2] = 8;
        let m = u(v, 2, 2);
        assert_eq!(fuse_interest(&m, &m, &m).unwrap().get(0, 1), 24);
    }

    #[test]
    fn fusion_matches_elementwise_addition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (w, h) = (rng.random_range(1..10), rng.random_range(1..10));
            let mk = |rng: &mut ChaCha8Rng| {
                u((0..w * h).map(|_| rng.random_range(0..=8)).collect(), w, h)
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let raw = fuse_interest(&a, &b, &c).unwrap();
            for i in 0..w * h {
                let sum = a.values.as_slice()[i] + b.values.as_slice()[i] + c.values.as_slice()[i];
                assert_eq!(raw.as_slice()[i], sum);
            }
        }
    }

    #[test]
    fn mismatched_maps_are_rejected() {
        let a = u(vec![1; 4], 2, 2);
        let b = u(vec![1; 4], 4, 1);
        assert!(matches!(fuse_interest(&a, &b, &a), Err(Error::Contract(_))));
    }

    // --- blur ---------------------------------------------------------------

    #[test]
    fn constant_interest_blurs_to_itself() {
        let raw = Grid::filled(30, 20, 7u8);
        for v in blur_interest(&raw, 10.0).unwrap().as_slice() {
            assert!((v - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_spike_blurs_symmetrically() {
        let mut raw = Grid::filled(41, 41, 0u8);
        raw.set(20, 20, 24);
        let b = blur_interest(&raw, 10.0).unwrap();
        for y in 0..41 {
            for x in 0..41 {
                assert_eq!(b.get(x, y), b.get(40 - x, y));
                assert_eq!(b.get(x, y), b.get(x, 40 - y));
            }
        }
        assert!(b.get(20, 20) > b.get(21, 20));
    }

    #[test]
    fn blur_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let raw = Grid::from_fn(16, 16, |_, _| rng.random_range(0..=24u8));
            let ours = blur_interest(&raw, 10.0).unwrap();
            for (a, b) in ours.as_slice().iter().zip(direct_blur(&raw, 5.0)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn blur_width_below_one_is_rejected() {
        assert!(blur_interest(&Grid::filled(2, 2, 0u8), 0.5).is_err());
    }

    // --- extraction -----------------------------------------------------------

    #[test]
    fn constant_map_uses_tie_break_and_flags_degenerate() {
        let map = Grid::filled(30, 30, 1.0);
        let pts = extract_points(&map, 3, 10.0).unwrap();
        assert!(pts.degenerate);
        let xy: Vec<_> = pts.points.iter().map(|p| (p.x, p.y)).collect();
        // first row first; then the first pixel at distance >= 10 in row-major order
        assert_eq!(xy, vec![(0, 0), (10, 0), (20, 0)]);
    }

    #[test]
    fn three_spikes_come_back_in_order() {
        let mut map = Grid::filled(50, 50, 0.0);
        map.set(5, 5, 2.0);
        map.set(40, 10, 3.0);
        map.set(20, 45, 1.0);
        let pts = extract_points(&map, 3, 10.0).unwrap();
        assert!(!pts.degenerate);
        let got: Vec<_> = pts.points.iter().map(|p| (p.x, p.y, p.score)).collect();
        assert_eq!(got, vec![(40, 10, 3.0), (5, 5, 2.0), (20, 45, 1.0)]);
    }

    #[test]
    fn exhausted_map_stops_early() {
        let map = Grid::filled(3, 3, 0.5);
        let pts = extract_points(&map, 3, 10.0).unwrap();
        assert_eq!(pts.points.len(), 1);
    }

    #[test]
    fn empty_map_is_rejected() {
        let map: Grid<f64> = Grid::filled(0, 0, 0.0);
        assert!(matches!(
            extract_points(&map, 3, 10.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn extraction_matches_brute_force_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            // coarse values so ties exercise the tie-break
            let map = Grid::from_fn(32, 32, |_, _| rng.random_range(0..20) as f64 / 4.0);
            let radius = rng.random_range(0..15) as f64;
            let ours: Vec<_> = extract_points(&map, 3, radius)
                .unwrap()
                .points
                .iter()
                .map(|p| (p.x, p.y, p.score))
                .collect();
            assert_eq!(ours, brute_force_greedy(&map, 3, radius));
        }
    }

    // --- properties -------------------------------------------------------------

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn blurred_values_stay_within_raw_range(
            w in 1usize..24, h in 1usize..24, seed in any::<u64>(), width in 1.0f64..12.0
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = Grid::from_fn(w, h, |_, _| rng.random_range(0..=24u8));
            let (lo, hi) = raw.min_max().unwrap();
            for &v in blur_interest(&raw, width).unwrap().as_slice() {
                prop_assert!(v >= f64::from(lo) && v <= f64::from(hi));
            }
        }

        #[test]
        fn selected_points_respect_separation(
            w in 1usize..40, h in 1usize..40, seed in any::<u64>(),
            radius in 0u32..20, k in 1usize..6
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = Grid::from_fn(w, h, |_, _| rng.random::<f64>());
            let radius = f64::from(radius) / 2.0;
            let pts = extract_points(&map, k, radius).unwrap().points;
            prop_assert!(pts.windows(2).all(|p| p[0].score >= p[1].score));
            for (i, a) in pts.iter().enumerate() {
                for b in &pts[i + 1..] {
                    let d = ((a.x as f64 - b.x as f64).powi(2) + (a.y as f64 - b.y as f64).powi(2)).sqrt();
                    prop_assert!(d >= radius);
                }
            }
        }
    }
}
