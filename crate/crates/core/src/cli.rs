//! The `analyze`, `batch` and `evaluate` commands.
//!
//! Each command returns its result and writes files; printing and exit codes
//! are left to the binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, match_points, AnnotationSet, ConcurrenceReport};
use crate::grid::Grid;
use crate::imageio::{
    encode_pgm16, encode_pgm8, encode_png, load_image, preprocess, render_overlay, write_bytes,
};
use crate::record::{AnalysisRecord, DebugOutputs, Timing};
use crate::saliency::{analyze, Analysis, Channel};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "UNCOMMON_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "uncommon-out";
/// Per-image processing budget reported in batch summaries.
pub const BUDGET_MS: f64 = 1000.0;
/// Largest possible interest value (three channels of rank 8).
const MAX_INTEREST: f64 = 24.0;

const SUPPORTED_EXTENSIONS: [&str; 4] = ["ppm", "pgm", "pnm", "png"];

fn is_supported(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| SUPPORTED_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_string())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn millis(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

fn write_debug_maps(analysis: &Analysis, id: &str, dir: &Path) -> Result<DebugOutputs> {
    let scale = (f64::from(u16::MAX) / MAX_INTEREST).floor();
    let to16 = |v: f64| (v * scale).round().clamp(0.0, f64::from(u16::MAX)) as u16;
    let mut files = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        write_bytes(&dir.join(&name), &bytes)?;
        files.push(name);
        Ok(())
    };
    put(
        format!("{id}.interest_raw.pgm"),
        encode_pgm16(&analysis.interest.raw.map(|v| to16(f64::from(v)))),
    )?;
    put(
        format!("{id}.interest_blurred.pgm"),
        encode_pgm16(&analysis.interest.blurred.map(to16)),
    )?;
    for (c, ch) in Channel::ALL.iter().enumerate() {
        let name = ch.name();
        // rank 8 -> 248
        let uncommon: Grid<u8> = analysis.uncommon[c].values.map(|v| v.saturating_mul(31));
        put(format!("{id}.{name}.uncommon.pgm"), encode_pgm8(&uncommon))?;
        if let Some(seg) = &analysis.segmentations[c] {
            put(
                format!("{id}.{name}.segmentation.pgm"),
                encode_pgm8(&seg.map.label_image()),
            )?;
            put(
                format!("{id}.{name}.histogram.pgm"),
                encode_pgm8(&seg.histogram_image()),
            )?;
        }
    }
    Ok(DebugOutputs {
        interest_pgm_scale: scale,
        files,
    })
}

/// Load, preprocess and analyze one image, writing the overlay, the record
/// and (with `debug`) the intermediate maps into `output_dir`.
pub fn cmd_analyze(
    image_path: &Path,
    config: &PipelineConfig,
    output_dir: &Path,
    debug: bool,
) -> Result<AnalysisRecord> {
    config.validate()?;
    let start = Instant::now();
    let loaded = load_image(image_path)?;
    let img = preprocess(
        &loaded,
        config.downsample_factor,
        config.crop_width,
        config.crop_height,
    )?;
    let load_ms = millis(start);
    let t = Instant::now();
    let analysis = analyze(&img, config)?;
    let analyze_ms = millis(t);

    ensure_dir(output_dir)?;
    let id = image_id(image_path);
    let source = image_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut record = AnalysisRecord::new(id.clone(), source, config, &analysis);
    let overlay = render_overlay(&img, &analysis.points)?;
    write_bytes(
        &output_dir.join(&record.overlay_file),
        &encode_png(&overlay)?,
    )?;
    if debug {
        record.debug = Some(write_debug_maps(&analysis, &id, output_dir)?);
    }
    record.timing = Timing {
        load_ms,
        analyze_ms,
        total_ms: millis(start),
    };
    write_json(&output_dir.join(format!("{id}.json")), &record)?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchFailure {
    pub file: String,
    pub kind: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchTiming {
    pub total_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
    pub budget_ms: f64,
    pub over_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub images_found: usize,
    pub processed: usize,
    pub image_ids: Vec<String>,
    pub failed: Vec<BatchFailure>,
    pub timing: BatchTiming,
}

impl BatchSummary {
    /// Summary without the `timing` block.
    pub fn payload(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("summary serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub records: Vec<AnalysisRecord>,
    pub summary: BatchSummary,
}

/// Supported image files directly inside `dir`, in lexicographic order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_supported(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Analyze every image in `dir`. Per-image failures are collected in the
/// summary; only an empty directory is an error.
pub fn cmd_batch(
    dir: &Path,
    config: &PipelineConfig,
    output_dir: &Path,
    debug: bool,
) -> Result<BatchOutcome> {
    config.validate()?;
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::Dimension(format!(
            "{}: no supported images (ppm, pgm, png)",
            dir.display()
        )));
    }
    ensure_dir(output_dir)?;
    let start = Instant::now();
    // par_iter keeps input order in the collected results
    let results: Vec<(PathBuf, Result<AnalysisRecord>)> = files
        .par_iter()
        .map(|f| (f.clone(), cmd_analyze(f, config, output_dir, debug)))
        .collect();
    let total_ms = millis(start);

    let mut records = Vec::new();
    let mut failed = Vec::new();
    for (path, result) in results {
        match result {
            Ok(r) => records.push(r),
            Err(e) => failed.push(BatchFailure {
                file: path
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                kind: e.kind().to_string(),
                error: e.to_string(),
            }),
        }
    }
    let per_image: Vec<f64> = records.iter().map(|r| r.timing.total_ms).collect();
    let summary = BatchSummary {
        images_found: files.len(),
        processed: records.len(),
        image_ids: records.iter().map(|r| r.image_id.clone()).collect(),
        failed,
        timing: BatchTiming {
            total_ms,
            mean_ms: if per_image.is_empty() {
                0.0
            } else {
                per_image.iter().sum::<f64>() / per_image.len() as f64
            },
            max_ms: per_image.iter().copied().fold(0.0, f64::max),
            budget_ms: BUDGET_MS,
            over_budget: per_image.iter().filter(|&&t| t > BUDGET_MS).count(),
        },
    };
    write_json(&output_dir.join("records.json"), &records)?;
    write_json(&output_dir.join("summary.json"), &summary)?;
    Ok(BatchOutcome { records, summary })
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn from_value<T: serde::de::DeserializeOwned>(path: &Path, v: serde_json::Value) -> Result<T> {
    serde_json::from_value(v).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Records from a JSON file (one record or an array) or from every
/// per-image record file in a directory.
pub fn load_records(path: &Path) -> Result<Vec<AnalysisRecord>> {
    if path.is_dir() {
        let mut out = Vec::new();
        for f in json_files(path)? {
            // records.json, summary.json and reports are not single records
            if let Ok(r) = serde_json::from_value::<AnalysisRecord>(read_json(&f)?) {
                out.push(r);
            }
        }
        return Ok(out);
    }
    let v = read_json(path)?;
    if v.is_array() {
        from_value(path, v)
    } else {
        Ok(vec![from_value(path, v)?])
    }
}

/// Annotation documents from a file (one document or an array) or a
/// directory of documents.
pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationSet>> {
    if path.is_dir() {
        return json_files(path)?
            .iter()
            .map(|f| from_value(f, read_json(f)?))
            .collect();
    }
    let v = read_json(path)?;
    if v.is_array() {
        from_value(path, v)
    } else {
        Ok(vec![from_value(path, v)?])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusSensitivity {
    pub match_radius: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationOutput {
    #[serde(flatten)]
    pub report: ConcurrenceReport,
    /// Aggregate counts at half, equal and double the match radius.
    pub radius_sensitivity: Vec<RadiusSensitivity>,
}

/// Score the reported points of `records_path` against `annotations_path`
/// and write `report.json` into `output_dir`.
pub fn cmd_evaluate(
    records_path: &Path,
    annotations_path: &Path,
    config: &PipelineConfig,
    output_dir: &Path,
) -> Result<EvaluationOutput> {
    config.validate()?;
    let records = load_records(records_path)?;
    let annotations = load_annotations(annotations_path)?;
    let mut predictions = BTreeMap::new();
    for r in &records {
        if predictions
            .insert(r.image_id.clone(), r.blurred_points.interest_points())
            .is_some()
        {
            return Err(Error::Mismatch(format!(
                "duplicate records for image '{}'",
                r.image_id
            )));
        }
    }
    let report = evaluate(&predictions, &annotations, config.match_radius)?;
    let truth: BTreeMap<&str, &AnnotationSet> = annotations
        .iter()
        .map(|a| (a.image_id.as_str(), a))
        .collect();
    let mut radius_sensitivity = Vec::new();
    for factor in [0.5, 1.0, 2.0] {
        let radius = config.match_radius * factor;
        let mut row = RadiusSensitivity {
            match_radius: radius,
            tp: 0,
            fp: 0,
            fn_: 0,
        };
        for (id, points) in &predictions {
            let m = match_points(points, truth[id.as_str()], radius)?;
            row.tp += m.tp;
            row.fp += m.fp;
            row.fn_ += m.fn_;
        }
        radius_sensitivity.push(row);
    }
    let out = EvaluationOutput {
        report,
        radius_sensitivity,
    };
    ensure_dir(output_dir)?;
    write_json(&output_dir.join("report.json"), &out)?;
    Ok(out)
}
