//! Uncommon-map novelty detection for color field imagery.
//!
//! Each of the hue, saturation and intensity planes of an image is segmented
//! with a co-occurrence histogram. Pixel classes are ranked by size, rarer
//! classes scoring higher, and the three resulting uncommon maps are summed
//! and blurred into an interest map whose top peaks are reported as the
//! points most worth a closer look.
//!
//! ```no_run
//! use uncommon::{analyze, load_image, preprocess, PipelineConfig};
//!
//! let config = PipelineConfig::default();
//! let img = load_image("outcrop.png")?;
//! let img = preprocess(&img, config.downsample_factor, config.crop_width, config.crop_height)?;
//! let analysis = analyze(&img, &config)?;
//! for p in &analysis.points.blurred.points {
//!     println!("{} {} {:.3}", p.x, p.y, p.score);
//! }
//! # Ok::<(), uncommon::Error>(())
//! ```

pub mod cli;
pub mod color;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod filter;
pub mod grid;
pub mod imageio;
pub mod record;
pub mod saliency;
pub mod segmentation;
pub mod synthetic;

pub use color::{rgb_to_hsi, HsiPlanes};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use evaluation::{compute_rates, match_points, AnnotationSet, ConcurrenceReport, Rates};
pub use grid::Grid;
pub use imageio::{load_image, preprocess, render_overlay, save_image, RasterImage};
pub use record::AnalysisRecord;
pub use saliency::{
    analyze, Analysis, InterestMap, InterestPoint, InterestPointSet, PointList, UncommonMap,
};
pub use segmentation::{segment_plane, SegmentationMap, SegmentationParams};
