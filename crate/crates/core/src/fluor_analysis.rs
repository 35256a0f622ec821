//! Per-cell fluorescence statistics and per-cluster records.
//!
//! "Horizontal" profiles run along the cell's major axis and "vertical" ones
//! along its minor axis. Cluster positions are normalised so that the two
//! poles of the cell sit at `x = 0` and `x = 1`.

use crate::cell_geometry::CellFrame;
use crate::components::Component;
use crate::imaging::GrayImage;

pub const DEFAULT_PROFILE_POINTS: usize = 20;
pub const DEFAULT_POLAR_LOW: f64 = 0.25;
pub const DEFAULT_POLAR_HIGH: f64 = 0.75;

/// Population mean and standard deviation over the cell's pixels.
pub fn cell_intensity_stats(cell: &Component, fluor: &GrayImage) -> (f64, f64) {
    stats(cell.pixels().iter().map(|&(r, c)| fluor.get(r, c) as f64))
}

fn stats(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Mean divided by standard deviation (the reciprocal of the usual
/// coefficient of variation). `None` when the deviation is zero.
pub fn cvi(mean: f64, std: f64) -> Option<f64> {
    if std == 0.0 {
        None
    } else {
        Some(mean / std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileAxis {
    /// Along the major axis.
    Horizontal,
    /// Along the minor axis.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregation {
    Mean,
    Max,
    Sum,
}

impl ProfileAxis {
    pub const ALL: [ProfileAxis; 2] = [ProfileAxis::Vertical, ProfileAxis::Horizontal];

    pub fn name(self) -> &'static str {
        match self {
            ProfileAxis::Horizontal => "horizontal",
            ProfileAxis::Vertical => "vertical",
        }
    }
}

impl Aggregation {
    pub const ALL: [Aggregation; 3] = [Aggregation::Mean, Aggregation::Max, Aggregation::Sum];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
            Aggregation::Sum => "sum",
        }
    }
}

fn project(frame: &CellFrame, axis: ProfileAxis, row: usize, col: usize) -> f64 {
    let (x, y) = frame.to_frame(row as f64, col as f64);
    match axis {
        ProfileAxis::Horizontal => x,
        ProfileAxis::Vertical => y,
    }
}

/// Splits the cell's extent along `axis` into `n` equal bins and aggregates
/// the intensities of the pixels falling in each. Empty bins are 0.
///
/// Panics if `n < 2`.
pub fn intensity_profile(
    cell: &Component,
    frame: &CellFrame,
    fluor: &GrayImage,
    axis: ProfileAxis,
    agg: Aggregation,
    n: usize,
) -> Vec<f64> {
    assert!(n >= 2, "profile needs at least two points");
    let proj: Vec<f64> = cell.pixels().iter().map(|&(r, c)| project(frame, axis, r, c)).collect();
    let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n as f64;

    let mut sum = vec![0.0; n];
    let mut max = vec![0.0f64; n];
    let mut count = vec![0usize; n];
    for (&(r, c), &t) in cell.pixels().iter().zip(&proj) {
        let k = if width > 0.0 {
            (((t - lo) / width) as usize).min(n - 1)
        } else {
            0
        };
        let v = fluor.get(r, c) as f64;
        sum[k] += v;
        max[k] = max[k].max(v);
        count[k] += 1;
    }
    match agg {
        Aggregation::Sum => sum,
        Aggregation::Max => max,
        Aggregation::Mean => sum
            .iter()
            .zip(&count)
            .map(|(&s, &k)| if k == 0 { 0.0 } else { s / k as f64 })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRecord {
    pub cluster_id: u32,
    pub size_um2: f64,
    /// Normalised `(x, y)` position of the brightest cluster pixel in the cell frame.
    pub center: (f64, f64),
    pub is_polar: bool,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub sum: f64,
}

/// Strict inequalities: positions exactly at the bounds are not polar.
pub fn is_polar(x: f64, low: f64, high: f64) -> bool {
    x < low || x > high
}

/// Position of `(row, col)` normalised by the cell's projected extent, clamped
/// to `[0, 1]`. A zero extent maps to 0.5.
pub fn normalized_position(cell: &Component, frame: &CellFrame, row: usize, col: usize) -> (f64, f64) {
    let extent = |axis| {
        cell.pixels()
            .iter()
            .map(|&(r, c)| project(frame, axis, r, c))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)))
    };
    let norm = |axis| {
        let (lo, hi) = extent(axis);
        let t = project(frame, axis, row, col);
        if hi > lo {
            ((t - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    };
    (norm(ProfileAxis::Horizontal), norm(ProfileAxis::Vertical))
}

/// The brightest pixel, ties broken by smallest `(row, col)`.
fn brightest_pixel(cluster: &Component, fluor: &GrayImage) -> (usize, usize) {
    let mut best = cluster.pixels()[0];
    let mut best_v = fluor.get(best.0, best.1);
    for &(r, c) in &cluster.pixels()[1..] {
        let v = fluor.get(r, c);
        if v > best_v {
            best = (r, c);
            best_v = v;
        }
    }
    best
}

pub fn cluster_metrics(
    cluster: &Component,
    cell: &Component,
    frame: &CellFrame,
    fluor: &GrayImage,
    pixel_size_um: f64,
    polar_bounds: (f64, f64),
) -> ClusterRecord {
    let values = cluster.pixels().iter().map(|&(r, c)| fluor.get(r, c) as f64);
    let (mean, std) = stats(values.clone());
    let sum: f64 = values.clone().sum();
    let max = values.fold(0.0, f64::max);
    let (r, c) = brightest_pixel(cluster, fluor);
    let center = normalized_position(cell, frame, r, c);
    ClusterRecord {
        cluster_id: cluster.id(),
        size_um2: cluster.area_px() as f64 * pixel_size_um * pixel_size_um,
        center,
        is_polar: is_polar(center.0, polar_bounds.0, polar_bounds.1),
        mean,
        std,
        max,
        sum,
    }
}

/// Index of the record with the highest max intensity; the first on ties.
pub fn leading_cluster(clusters: &[ClusterRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in clusters.iter().enumerate() {
        if best.is_none_or(|b| c.max > clusters[b].max) {
            best = Some(i);
        }
    }
    best
}

/// Six profiles keyed by axis and aggregation, in `(vertical, horizontal) ×
/// (mean, max, sum)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Profiles(pub Vec<((ProfileAxis, Aggregation), Vec<f64>)>);

impl Profiles {
    pub fn get(&self, axis: ProfileAxis, agg: Aggregation) -> &[f64] {
        &self
            .0
            .iter()
            .find(|(k, _)| *k == (axis, agg))
            .expect("all six profiles are present")
            .1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFluorStats {
    pub channel_name: String,
    pub mean: f64,
    pub std: f64,
    pub cvi: Option<f64>,
    pub profiles: Profiles,
    pub clusters: Vec<ClusterRecord>,
    pub leading_cluster_index: Option<usize>,
}

impl CellFluorStats {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn has_clusters(&self) -> bool {
        !self.clusters.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluorSettings {
    pub pixel_size_um: f64,
    pub profile_points: usize,
    pub polar_low: f64,
    pub polar_high: f64,
}

impl Default for FluorSettings {
    fn default() -> Self {
        Self {
            pixel_size_um: 1.0,
            profile_points: DEFAULT_PROFILE_POINTS,
            polar_low: DEFAULT_POLAR_LOW,
            polar_high: DEFAULT_POLAR_HIGH,
        }
    }
}

/// All fluorescence fields of one cell in one channel. `clusters` are the
/// cluster components intersecting the cell, in ascending id order.
pub fn analyze_cell_channel(
    channel_name: &str,
    cell: &Component,
    frame: &CellFrame,
    fluor: &GrayImage,
    clusters: &[&Component],
    settings: &FluorSettings,
) -> CellFluorStats {
    let (mean, std) = cell_intensity_stats(cell, fluor);
    let mut profiles = Vec::with_capacity(6);
    for axis in ProfileAxis::ALL {
        for agg in Aggregation::ALL {
            profiles.push((
                (axis, agg),
                intensity_profile(cell, frame, fluor, axis, agg, settings.profile_points),
            ));
        }
    }
    let records: Vec<ClusterRecord> = clusters
        .iter()
        .map(|k| {
            cluster_metrics(
                k,
                cell,
                frame,
                fluor,
                settings.pixel_size_um,
                (settings.polar_low, settings.polar_high),
            )
        })
        .collect();
    CellFluorStats {
        channel_name: channel_name.to_string(),
        mean,
        std,
        cvi: cvi(mean, std),
        profiles: Profiles(profiles),
        leading_cluster_index: leading_cluster(&records),
        clusters: records,
    }
}
