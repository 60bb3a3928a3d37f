//! JSON records written by the command-line tool.
//!
//! Everything except the `timing` block is a pure function of the input
//! bytes and the config, so reruns produce byte-identical payloads.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::saliency::{Analysis, InterestPoint, PointList};

/// Per-channel values in H, S, I order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerChannel<T> {
    pub hue: T,
    pub saturation: T,
    pub intensity: T,
}

impl<T> PerChannel<T> {
    pub fn from_array([hue, saturation, intensity]: [T; 3]) -> Self {
        PerChannel {
            hue,
            saturation,
            intensity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedPoint {
    pub rank: usize,
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedPoints {
    pub reported: bool,
    pub degenerate: bool,
    pub points: Vec<RecordedPoint>,
}

impl From<&PointList> for RecordedPoints {
    fn from(list: &PointList) -> Self {
        RecordedPoints {
            reported: list.reported,
            degenerate: list.degenerate,
            points: list
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| RecordedPoint {
                    rank: i + 1,
                    x: p.x,
                    y: p.y,
                    score: p.score,
                })
                .collect(),
        }
    }
}

impl RecordedPoints {
    pub fn interest_points(&self) -> Vec<InterestPoint> {
        self.points
            .iter()
            .map(|p| InterestPoint {
                x: p.x,
                y: p.y,
                score: p.score,
            })
            .collect()
    }
}

/// Debug map files written next to the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebugOutputs {
    /// 16-bit PGM sample = round(interest value * scale).
    pub interest_pgm_scale: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub load_ms: f64,
    pub analyze_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub image_id: String,
    pub source_file: String,
    pub config: PipelineConfig,
    pub width: usize,
    pub height: usize,
    pub blurred_points: RecordedPoints,
    pub raw_points: RecordedPoints,
    pub suppression_radius: f64,
    pub class_counts: PerChannel<usize>,
    pub class_populations: PerChannel<Vec<usize>>,
    pub warnings: Vec<String>,
    pub overlay_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debug: Option<DebugOutputs>,
    pub timing: Timing,
}

impl AnalysisRecord {
    pub fn new(
        image_id: String,
        source_file: String,
        config: &PipelineConfig,
        analysis: &Analysis,
    ) -> Self {
        let populations = [0, 1, 2].map(|c| {
            analysis.segmentations[c]
                .as_ref()
                .map(|s| s.map.populations.clone())
                .unwrap_or_default()
        });
        let raw = &analysis.interest.raw;
        AnalysisRecord {
            overlay_file: format!("{image_id}.overlay.png"),
            image_id,
            source_file,
            config: config.clone(),
            width: raw.width(),
            height: raw.height(),
            blurred_points: (&analysis.points.blurred).into(),
            raw_points: (&analysis.points.raw).into(),
            suppression_radius: analysis.points.suppression_radius,
            class_counts: PerChannel::from_array(analysis.class_counts()),
            class_populations: PerChannel::from_array(populations),
            warnings: analysis.warnings.clone(),
            debug: None,
            timing: Timing {
                load_ms: 0.0,
                analyze_ms: 0.0,
                total_ms: 0.0,
            },
        }
    }

    /// The record without its `timing` block: the part that must be
    /// reproducible.
    pub fn payload(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("record serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        v
    }
}
