use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Method, Mode, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "cellanalyzer",
    version,
    about = "Segmentation evaluation and single-cell analysis"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON file with default settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub pixel_size_um: Option<f64>,
    /// Worker threads for per-frame processing.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for label render colors [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "cellanalyzer-out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert cell and fluorescence images to padded 8-bit network inputs.
    Preprocess(InputArgs),
    /// Threshold cell images into baseline masks.
    Segment(SegmentArgs),
    /// Score a predicted mask against two ground-truth masks.
    Evaluate(EvaluateArgs),
    /// Filter, measure and quantify cells into database.csv.
    Analyze(AnalyzeArgs),
}

/// Either a manifest or a single frame given by flags.
#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long, conflicts_with_all = ["cell_image", "cell_mask", "channel"])]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub cell_image: Option<PathBuf>,
    #[arg(long)]
    pub cell_mask: Option<PathBuf>,
    /// NAME=IMAGE or NAME=IMAGE,CLUSTER_MASK; repeatable.
    #[arg(long, value_name = "SPEC")]
    pub channel: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub min_area_px: Option<usize>,
    #[arg(long)]
    pub min_length_um: Option<f64>,
    #[arg(long)]
    pub min_width_um: Option<f64>,
    /// Cells closer than this many empty pixels are dropped in pairs.
    #[arg(long)]
    pub min_gap_px: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Foreground is at or below the threshold (dark cells).
    #[arg(long)]
    pub invert: bool,
    /// Apply the size and proximity filters to the thresholded mask.
    #[arg(long)]
    pub post: bool,
    #[command(flatten)]
    pub filters: FilterArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt1: PathBuf,
    #[arg(long)]
    pub gt2: PathBuf,
    /// Preset intersection threshold and beta [default: cell].
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Write label and diff images.
    #[arg(long)]
    pub render: bool,
    /// Frame id used in render file names.
    #[arg(long, default_value_t = 0)]
    pub frame_id: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub filters: FilterArgs,
    #[arg(long)]
    pub polar_low: Option<f64>,
    #[arg(long)]
    pub polar_high: Option<f64>,
    #[arg(long)]
    pub profile_points: Option<usize>,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl Cli {
    /// Settings given directly on the command line.
    pub fn flag_settings(&self) -> Settings {
        let c = &self.common;
        let mut s = Settings {
            pixel_size_um: c.pixel_size_um,
            jobs: c.jobs,
            seed: c.seed,
            ..Settings::default()
        };
        let filters = |s: &mut Settings, f: &FilterArgs| {
            s.min_area_px = f.min_area_px;
            s.min_length_um = f.min_length_um;
            s.min_width_um = f.min_width_um;
            s.min_gap_px = f.min_gap_px;
        };
        match &self.command {
            Command::Preprocess(_) => {}
            Command::Segment(a) => {
                s.method = a.method;
                s.invert = flag(a.invert);
                s.post = flag(a.post);
                filters(&mut s, &a.filters);
            }
            Command::Evaluate(a) => {
                s.mode = a.mode;
                s.iou_threshold = a.iou_threshold;
                s.beta = a.beta;
                s.render = flag(a.render);
            }
            Command::Analyze(a) => {
                filters(&mut s, &a.filters);
                s.polar_low = a.polar_low;
                s.polar_high = a.polar_high;
                s.profile_points = a.profile_points;
            }
        }
        s
    }
}
