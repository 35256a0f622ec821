//! One frame of the analysis pipeline: filter cells, measure them, and
//! collect per-channel fluorescence statistics into database rows.

use std::collections::BTreeMap;

use log::warn;
use thiserror::Error;

use crate::cell_analyzer::{
    assign_clusters, filter_by_proximity, filter_by_size, filter_clusters, AnalysisConfig, AnalyzerError,
};
use crate::cell_geometry::{fit_cell_frame, fit_midline, measure_cell, CellFrame};
use crate::components::{label_components, ComponentSet};
use crate::database::{build_records, CellRecord, DatabaseError};
use crate::fluor_analysis::{analyze_cell_channel, CellFluorStats, FluorSettings};
use crate::imaging::{BinaryMask, GrayImage};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("channel {channel}: image is {image:?}, cell mask is {mask:?}")]
    DimensionMismatch {
        channel: String,
        image: (usize, usize),
        mask: (usize, usize),
    },
    #[error(transparent)]
    Analyzer(#[from] AnalyzerError),
    #[error(transparent)]
    Database(#[from] DatabaseError),
}

pub struct ChannelInput<'a> {
    pub name: &'a str,
    pub image: &'a GrayImage,
    pub clusters: &'a BinaryMask,
}

/// The cells that survived filtering, with the intermediate sets kept for
/// rendering and inspection.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_id: usize,
    pub labelled: ComponentSet,
    pub kept: ComponentSet,
    pub records: Vec<CellRecord>,
}

/// Runs size and proximity filtering on a labelled cell mask.
pub fn filter_cells(cells: &ComponentSet, cfg: &AnalysisConfig) -> ComponentSet {
    filter_by_proximity(&filter_by_size(cells, cfg), cfg)
}

pub fn analyze_frame(
    frame_id: usize,
    cell_mask: &BinaryMask,
    channels: &[ChannelInput<'_>],
    cfg: &AnalysisConfig,
) -> Result<FrameResult, PipelineError> {
    cfg.validate()?;
    let dims = (cell_mask.height(), cell_mask.width());
    for ch in channels {
        for found in [
            (ch.image.height(), ch.image.width()),
            (ch.clusters.height(), ch.clusters.width()),
        ] {
            if found != dims {
                return Err(PipelineError::DimensionMismatch {
                    channel: ch.name.to_string(),
                    image: found,
                    mask: dims,
                });
            }
        }
    }

    let labelled = label_components(cell_mask);
    let filtered = filter_cells(&labelled, cfg);

    // Cells that cannot carry a frame are dropped before any cluster logic.
    let mut frames: BTreeMap<u32, CellFrame> = BTreeMap::new();
    for c in &filtered {
        match fit_cell_frame(c) {
            Ok(f) => {
                frames.insert(c.id(), f);
            }
            Err(e) => warn!("frame {frame_id}: dropping cell: {e}"),
        }
    }
    let kept = filtered.retain(|c| frames.contains_key(&c.id()));

    let mut measurements = BTreeMap::new();
    for c in &kept {
        let frame = &frames[&c.id()];
        let midline = fit_midline(c, frame);
        measurements.insert(c.id(), measure_cell(c, &midline, frame, cfg.pixel_size_um));
    }

    let settings = FluorSettings {
        pixel_size_um: cfg.pixel_size_um,
        profile_points: cfg.profile_points,
        polar_low: cfg.polar_low,
        polar_high: cfg.polar_high,
    };
    let mut fluor = Vec::with_capacity(channels.len());
    for ch in channels {
        let clusters = filter_clusters(&label_components(ch.clusters), &kept)?;
        let assignment = assign_clusters(&clusters, &kept)?;
        let mut per_cell: BTreeMap<u32, CellFluorStats> = BTreeMap::new();
        for c in &kept {
            let members: Vec<_> = assignment
                .clusters_of(c.id())
                .iter()
                .filter_map(|&k| clusters.by_id(k))
                .collect();
            per_cell.insert(
                c.id(),
                analyze_cell_channel(ch.name, c, &frames[&c.id()], ch.image, &members, &settings),
            );
        }
        fluor.push((ch.name.to_string(), per_cell));
    }

    let records = build_records(&kept, &measurements, &fluor, frame_id)?;
    Ok(FrameResult {
        frame_id,
        labelled,
        kept,
        records,
    })
}
