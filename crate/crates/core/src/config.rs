use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saliency::MAX_UNCOMMON_CLASSES;
use crate::segmentation::{SegmentationParams, DEFAULT_MIN_FRACTION, MAX_BINS};

/// Every tunable of the pipeline. Serialized verbatim into analysis records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub downsample_factor: usize,
    pub crop_width: usize,
    pub crop_height: usize,
    pub quantization_bins: usize,
    /// Histogram smoothing, in bins.
    pub histogram_sigma: f64,
    /// Peaks below this fraction of all pixel pairs are ignored.
    pub min_peak_fraction: f64,
    /// Classes ranked beyond this count are treated as noise.
    pub max_classes: usize,
    /// Interest-map smoothing width `B`, in pixels.
    pub blur_width: f64,
    /// Gaussian standard deviation for the interest map; `None` means `B / 2`.
    pub blur_sigma: Option<f64>,
    pub top_k: usize,
    pub suppression_radius: f64,
    pub match_radius: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            downsample_factor: 2,
            crop_width: 192,
            crop_height: 144,
            quantization_bins: 64,
            histogram_sigma: 1.0,
            min_peak_fraction: DEFAULT_MIN_FRACTION,
            max_classes: MAX_UNCOMMON_CLASSES,
            blur_width: 10.0,
            blur_sigma: None,
            top_k: 3,
            suppression_radius: 10.0,
            match_radius: 10.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Contract(format!("config: {what}")));
        if self.downsample_factor == 0 || self.crop_width == 0 || self.crop_height == 0 {
            return bad("downsample factor and crop size must be positive");
        }
        if !(2..=MAX_BINS).contains(&self.quantization_bins) {
            return bad("quantization bins must be in 2..=256");
        }
        if !(1..=MAX_UNCOMMON_CLASSES).contains(&self.max_classes) {
            return bad("max classes must be in 1..=8");
        }
        if self.top_k == 0 {
            return bad("top k must be positive");
        }
        let reals = [
            ("histogram sigma", self.histogram_sigma),
            ("min peak fraction", self.min_peak_fraction),
            ("suppression radius", self.suppression_radius),
            ("match radius", self.match_radius),
            ("blur sigma", self.interest_sigma()),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.blur_width.is_finite() && self.blur_width >= 1.0) {
            return bad("blur width must be at least 1 pixel");
        }
        Ok(())
    }

    /// Standard deviation used for the interest-map blur.
    pub fn interest_sigma(&self) -> f64 {
        self.blur_sigma.unwrap_or(self.blur_width / 2.0)
    }

    pub fn segmentation(&self) -> SegmentationParams {
        SegmentationParams {
            bins: self.quantization_bins,
            smoothing_sigma: self.histogram_sigma,
            min_fraction: self.min_peak_fraction,
        }
    }
}
