//! Post-segmentation filters: minimum size, proximity, and the
//! cluster/cell intersection rule, plus the cluster-to-cell assignment.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::cell_geometry::measure_component;
use crate::components::{Component, ComponentSet};
use crate::fluor_analysis::{DEFAULT_POLAR_HIGH, DEFAULT_POLAR_LOW, DEFAULT_PROFILE_POINTS};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyzerError {
    #[error("invalid analysis config: {0}")]
    Config(String),
    #[error("cluster mask is {clusters:?} but cell mask is {cells:?}")]
    DimensionMismatch {
        clusters: (usize, usize),
        cells: (usize, usize),
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub min_area_px: usize,
    /// 0 disables the length check.
    pub min_length_um: f64,
    /// 0 disables the width check.
    pub min_width_um: f64,
    /// Minimum empty-pixel gap between two cells; closer pairs are both dropped.
    pub min_gap_px: f64,
    pub pixel_size_um: f64,
    pub polar_low: f64,
    pub polar_high: f64,
    pub profile_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            min_area_px: 30,
            min_length_um: 0.0,
            min_width_um: 0.0,
            min_gap_px: 2.0,
            pixel_size_um: 1.0,
            polar_low: DEFAULT_POLAR_LOW,
            polar_high: DEFAULT_POLAR_HIGH,
            profile_points: DEFAULT_PROFILE_POINTS,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), AnalyzerError> {
        let bad = |m: &str| Err(AnalyzerError::Config(m.to_string()));
        if !(self.min_length_um >= 0.0 && self.min_width_um >= 0.0 && self.min_gap_px >= 0.0) {
            return bad("thresholds must be non-negative");
        }
        if !(self.pixel_size_um > 0.0 && self.pixel_size_um.is_finite()) {
            return bad("pixel size must be positive");
        }
        if self.polar_low.partial_cmp(&self.polar_high) != Some(std::cmp::Ordering::Less) {
            return bad("polar_low must be below polar_high");
        }
        if self.profile_points < 2 {
            return bad("profile_points must be at least 2");
        }
        Ok(())
    }
}

/// Keeps cells with `area ≥ min_area_px` and, when enabled, measured length
/// and width at or above their minimums. Cells too small to measure fail an
/// enabled dimension check.
pub fn filter_by_size(cells: &ComponentSet, cfg: &AnalysisConfig) -> ComponentSet {
    let check_dims = cfg.min_length_um > 0.0 || cfg.min_width_um > 0.0;
    cells.retain(|c| {
        if c.area_px() < cfg.min_area_px {
            return false;
        }
        if !check_dims {
            return true;
        }
        match measure_component(c, cfg.pixel_size_um) {
            Ok((_, _, m)) => m.length_um >= cfg.min_length_um && m.width_um >= cfg.min_width_um,
            Err(_) => false,
        }
    })
}

/// Squared distance between the nearest pixel centers of two components.
/// Only boundary pixels can realise the minimum.
fn min_center_distance_sq(a: &[(usize, usize)], b: &[(usize, usize)]) -> u64 {
    let mut best = u64::MAX;
    for &(r1, c1) in a {
        for &(r2, c2) in b {
            let dr = r1.abs_diff(r2) as u64;
            let dc = c1.abs_diff(c2) as u64;
            best = best.min(dr * dr + dc * dc);
        }
    }
    best
}

/// Empty-pixel gap between two components: nearest pixel-center distance minus one.
pub fn component_gap(a: &Component, b: &Component) -> f64 {
    let d2 = min_center_distance_sq(&a.boundary_pixels(), &b.boundary_pixels());
    (d2 as f64).sqrt() - 1.0
}

/// Removes both members of every pair closer than `min_gap_px`. All decisions
/// are made against the input set, so removals do not cascade.
pub fn filter_by_proximity(cells: &ComponentSet, cfg: &AnalysisConfig) -> ComponentSet {
    let comps = cells.components();
    let boundaries: Vec<Vec<(usize, usize)>> = comps.iter().map(Component::boundary_pixels).collect();
    // Pixel centers closer than gap + 1; bounding boxes give a cheap reject.
    let reach = cfg.min_gap_px + 1.0;
    let mut drop = vec![false; comps.len()];
    for i in 0..comps.len() {
        let (ar0, ac0, ar1, ac1) = comps[i].bbox();
        for j in i + 1..comps.len() {
            let (br0, bc0, br1, bc1) = comps[j].bbox();
            let row_gap = br0.saturating_sub(ar1).max(ar0.saturating_sub(br1)) as f64;
            let col_gap = bc0.saturating_sub(ac1).max(ac0.saturating_sub(bc1)) as f64;
            if row_gap.hypot(col_gap) >= reach {
                continue;
            }
            let d = (min_center_distance_sq(&boundaries[i], &boundaries[j]) as f64).sqrt();
            if d - 1.0 < cfg.min_gap_px {
                drop[i] = true;
                drop[j] = true;
            }
        }
    }
    let dropped: Vec<u32> = comps
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| d)
        .map(|(c, _)| c.id())
        .collect();
    cells.retain(|c| !dropped.contains(&c.id()))
}

fn check_dims(clusters: &ComponentSet, cells: &ComponentSet) -> Result<(), AnalyzerError> {
    if clusters.dims() != cells.dims() {
        return Err(AnalyzerError::DimensionMismatch {
            clusters: clusters.dims(),
            cells: cells.dims(),
        });
    }
    Ok(())
}

/// Keeps clusters that share at least one pixel with some cell.
pub fn filter_clusters(clusters: &ComponentSet, cells: &ComponentSet) -> Result<ComponentSet, AnalyzerError> {
    check_dims(clusters, cells)?;
    let width = cells.dims().1;
    let cell_map = cells.label_map();
    Ok(clusters.retain(|k| k.pixels().iter().any(|&(r, c)| cell_map[r * width + c] != 0)))
}

/// Cluster ids per cell and cell ids per cluster, both ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterAssignment {
    pub per_cell: BTreeMap<u32, Vec<u32>>,
    pub per_cluster: BTreeMap<u32, Vec<u32>>,
}

impl ClusterAssignment {
    pub fn clusters_of(&self, cell_id: u32) -> &[u32] {
        self.per_cell.get(&cell_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn cells_of(&self, cluster_id: u32) -> &[u32] {
        self.per_cluster.get(&cluster_id).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Records every pixel-intersecting (cell, cluster) pair. A cluster touching
/// several cells is listed under each of them. Every cell gets an entry, empty
/// when it has no clusters.
pub fn assign_clusters(clusters: &ComponentSet, cells: &ComponentSet) -> Result<ClusterAssignment, AnalyzerError> {
    check_dims(clusters, cells)?;
    let width = cells.dims().1;
    let cell_map = cells.label_map();
    let mut out = ClusterAssignment::default();
    for cell in cells {
        out.per_cell.insert(cell.id(), Vec::new());
    }
    for k in clusters {
        let mut hits: Vec<u32> = k
            .pixels()
            .iter()
            .map(|&(r, c)| cell_map[r * width + c])
            .filter(|&id| id != 0)
            .collect();
        hits.sort_unstable();
        hits.dedup();
        if hits.is_empty() {
            continue;
        }
        for &cell_id in &hits {
            out.per_cell.entry(cell_id).or_default().push(k.id());
        }
        out.per_cluster.insert(k.id(), hits);
    }
    for list in out.per_cell.values_mut() {
        list.sort_unstable();
    }
    Ok(out)
}
