use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uncommon::cli::{cmd_analyze, cmd_batch, cmd_evaluate, DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV};
use uncommon::{AnalysisRecord, Error, PipelineConfig};

/// Find uncommon regions in color field images.
#[derive(Parser)]
#[command(name = "uncommon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one image and print its top interest points.
    Analyze {
        image: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Analyze every image in a directory.
    Batch {
        dir: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score analysis records against annotations.
    Evaluate {
        /// Record file (one record or an array) or directory of records.
        records: PathBuf,
        /// Annotation file (one document or an array) or directory.
        annotations: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, short = 'o', env = OUTPUT_DIR_ENV, default_value = DEFAULT_OUTPUT_DIR)]
    output_dir: PathBuf,
    /// Also write intermediate maps as PGM images.
    #[arg(long)]
    debug: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value_t = 2)]
    downsample_factor: usize,
    #[arg(long, default_value_t = 192)]
    crop_width: usize,
    #[arg(long, default_value_t = 144)]
    crop_height: usize,
    #[arg(long, default_value_t = 64)]
    quantization_bins: usize,
    #[arg(long, default_value_t = 1.0)]
    histogram_sigma: f64,
    #[arg(long, default_value_t = 0.0001)]
    min_peak_fraction: f64,
    #[arg(long, default_value_t = 8)]
    max_classes: usize,
    #[arg(long, default_value_t = 10.0)]
    blur_width: f64,
    /// Override the interest blur sigma (default: blur width / 2).
    #[arg(long)]
    blur_sigma: Option<f64>,
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    #[arg(long, default_value_t = 10.0)]
    suppression_radius: f64,
    #[arg(long, default_value_t = 10.0)]
    match_radius: f64,
}

impl From<ConfigArgs> for PipelineConfig {
    fn from(a: ConfigArgs) -> Self {
        PipelineConfig {
            downsample_factor: a.downsample_factor,
            crop_width: a.crop_width,
            crop_height: a.crop_height,
            quantization_bins: a.quantization_bins,
            histogram_sigma: a.histogram_sigma,
            min_peak_fraction: a.min_peak_fraction,
            max_classes: a.max_classes,
            blur_width: a.blur_width,
            blur_sigma: a.blur_sigma,
            top_k: a.top_k,
            suppression_radius: a.suppression_radius,
            match_radius: a.match_radius,
        }
    }
}

fn print_points(record: &AnalysisRecord) {
    for p in &record.blurred_points.points {
        println!("{} {} {} {:.6}", p.rank, p.x, p.y, p.score);
    }
}

fn report_error(e: &Error) {
    let json = serde_json::json!({
        "error": {
            "kind": e.kind(),
            "message": e.to_string(),
            "path": e.path().map(|p| p.display().to_string()),
        }
    });
    eprintln!("{json}");
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Analyze { image, common } => {
            let config = common.config.into();
            let record = cmd_analyze(&image, &config, &common.output_dir, common.debug)?;
            print_points(&record);
            for w in &record.warnings {
                eprintln!("warning: {w}");
            }
            if record.blurred_points.degenerate {
                eprintln!("warning: interest map is constant; points are tie-break positions");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Batch { dir, common } => {
            let config = common.config.into();
            let outcome = cmd_batch(&dir, &config, &common.output_dir, common.debug)?;
            let s = &outcome.summary;
            for f in &s.failed {
                eprintln!("failed: {}: {}", f.file, f.error);
            }
            println!(
                "processed {}/{} images, mean {:.1} ms, max {:.1} ms",
                s.processed, s.images_found, s.timing.mean_ms, s.timing.max_ms
            );
            Ok(if s.processed == 0 {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Evaluate {
            records,
            annotations,
            common,
        } => {
            let config = common.config.into();
            let out = cmd_evaluate(&records, &annotations, &config, &common.output_dir)?;
            let agg = &out.report.aggregate;
            println!("{}", agg.rates().percent_line());
            println!("{}", agg.means_line());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    run(cli).unwrap_or_else(|e| {
        report_error(&e);
        ExitCode::FAILURE
    })
}
