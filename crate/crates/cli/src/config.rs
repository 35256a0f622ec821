//! Layered settings: built-in defaults, then a JSON config file, then the
//! manifest's `config` block, then command-line flags.

use std::path::Path;

use anyhow::Result;
use cellanalyzer_core::cell_analyzer::AnalysisConfig;
use cellanalyzer_core::eval::EvalConfig;
use cellanalyzer_core::thresholding::{Polarity, ThresholdMethod};
use clap::ValueEnum;
use serde::Deserialize;

use crate::usage;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[value(alias = "minimum_error")]
    #[serde(alias = "minimum_error")]
    MinimumError,
    Yen,
}

impl From<Method> for ThresholdMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::MinimumError => ThresholdMethod::MinimumError,
            Method::Yen => ThresholdMethod::Yen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Cell,
    Fluor,
}

/// Every field is optional so layers can be overlaid.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub pixel_size_um: Option<f64>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub min_area_px: Option<usize>,
    pub min_length_um: Option<f64>,
    pub min_width_um: Option<f64>,
    pub min_gap_px: Option<f64>,
    pub polar_low: Option<f64>,
    pub polar_high: Option<f64>,
    pub profile_points: Option<usize>,
    pub method: Option<Method>,
    pub invert: Option<bool>,
    pub post: Option<bool>,
    pub mode: Option<Mode>,
    pub iou_threshold: Option<f64>,
    pub beta: Option<f64>,
    pub render: Option<bool>,
}

macro_rules! overlay_fields {
    ($base:ident, $over:ident, $($f:ident),*) => {
        Settings { $($f: $over.$f.or($base.$f)),* }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `over` win.
    pub fn overlay(&self, over: &Settings) -> Settings {
        let base = self;
        overlay_fields!(
            base,
            over,
            pixel_size_um,
            jobs,
            seed,
            min_area_px,
            min_length_um,
            min_width_um,
            min_gap_px,
            polar_low,
            polar_high,
            profile_points,
            method,
            invert,
            post,
            mode,
            iou_threshold,
            beta,
            render
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn method(&self) -> Method {
        self.method.unwrap_or(Method::MinimumError)
    }

    pub fn polarity(&self) -> Polarity {
        if self.invert.unwrap_or(false) {
            Polarity::Below
        } else {
            Polarity::Above
        }
    }

    pub fn analysis_config(&self) -> Result<AnalysisConfig> {
        let d = AnalysisConfig::default();
        let cfg = AnalysisConfig {
            min_area_px: self.min_area_px.unwrap_or(d.min_area_px),
            min_length_um: self.min_length_um.unwrap_or(d.min_length_um),
            min_width_um: self.min_width_um.unwrap_or(d.min_width_um),
            min_gap_px: self.min_gap_px.unwrap_or(d.min_gap_px),
            pixel_size_um: self.pixel_size_um.unwrap_or(d.pixel_size_um),
            polar_low: self.polar_low.unwrap_or(d.polar_low),
            polar_high: self.polar_high.unwrap_or(d.polar_high),
            profile_points: self.profile_points.unwrap_or(d.profile_points),
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }

    /// Mode presets, with explicit threshold and beta taking precedence.
    pub fn eval_config(&self) -> Result<EvalConfig> {
        let preset = match self.mode.unwrap_or(Mode::Cell) {
            Mode::Cell => EvalConfig::CELL,
            Mode::Fluor => EvalConfig::FLUOR,
        };
        EvalConfig::new(
            self.iou_threshold.unwrap_or(preset.iou_threshold()),
            self.beta.unwrap_or(preset.beta()),
        )
        .map_err(|e| usage(e.to_string()))
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.jobs {
            if n == 0 {
                return Err(usage("--jobs must be at least 1"));
            }
            b = b.num_threads(n);
        }
        Ok(b.build()?)
    }
}
