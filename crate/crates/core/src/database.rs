//! Per-cell database rows and their CSV serialization.
//!
//! Column layout: cell identity and geometry first, then one block per
//! fluorescence channel. Each intensity profile is packed into a single field
//! of semicolon-separated values. Cluster columns are numbered from 1 up to
//! the largest cluster count seen in that channel; cells with fewer clusters
//! leave the trailing cluster fields empty.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::cell_geometry::CellMeasurements;
use crate::components::ComponentSet;
use crate::fluor_analysis::{Aggregation, CellFluorStats, ProfileAxis};

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("cell {cell} is missing from {what}")]
    MissingKey { cell: u32, what: String },
    #[error("{what} has an entry for cell {cell} which is not a kept cell")]
    UnknownKey { cell: u32, what: String },
    #[error("rows disagree on channels: expected {expected:?}, found {found:?}")]
    ChannelMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("duplicate row (frame {frame}, cell {cell})")]
    DuplicateRow { frame: usize, cell: u32 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub id: u32,
    pub frame_id: usize,
    pub measurements: CellMeasurements,
    /// One entry per channel, in table channel order.
    pub channels: Vec<CellFluorStats>,
}

/// Builds one record per kept cell, ascending by id. Every map must be keyed
/// by exactly the kept cell ids.
pub fn build_records(
    cells: &ComponentSet,
    measurements: &BTreeMap<u32, CellMeasurements>,
    fluor: &[(String, BTreeMap<u32, CellFluorStats>)],
    frame_id: usize,
) -> Result<Vec<CellRecord>, DatabaseError> {
    let mut ids: Vec<u32> = cells.iter().map(|c| c.id()).collect();
    ids.sort_unstable();
    let check = |keys: &mut dyn Iterator<Item = u32>, what: &str| -> Result<(), DatabaseError> {
        for k in keys {
            if ids.binary_search(&k).is_err() {
                return Err(DatabaseError::UnknownKey {
                    cell: k,
                    what: what.to_string(),
                });
            }
        }
        Ok(())
    };
    check(&mut measurements.keys().copied(), "measurements")?;
    for (name, stats) in fluor {
        check(&mut stats.keys().copied(), &format!("channel {name}"))?;
    }

    ids.iter()
        .map(|&id| {
            let measurements = *measurements.get(&id).ok_or_else(|| DatabaseError::MissingKey {
                cell: id,
                what: "measurements".into(),
            })?;
            let channels = fluor
                .iter()
                .map(|(name, stats)| {
                    stats.get(&id).cloned().ok_or_else(|| DatabaseError::MissingKey {
                        cell: id,
                        what: format!("channel {name}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(CellRecord {
                id,
                frame_id,
                measurements,
                channels,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatabaseTable {
    rows: Vec<CellRecord>,
    channel_names: Vec<String>,
}

impl DatabaseTable {
    pub fn new(channel_names: Vec<String>) -> Self {
        Self {
            rows: Vec::new(),
            channel_names,
        }
    }

    /// Appends rows, keeping the table sorted by `(frame_id, id)`.
    pub fn extend(&mut self, rows: Vec<CellRecord>) -> Result<(), DatabaseError> {
        for r in &rows {
            let found: Vec<String> = r.channels.iter().map(|c| c.channel_name.clone()).collect();
            if found != self.channel_names {
                return Err(DatabaseError::ChannelMismatch {
                    expected: self.channel_names.clone(),
                    found,
                });
            }
        }
        self.rows.extend(rows);
        self.rows.sort_by_key(|r| (r.frame_id, r.id));
        if let Some(w) = self
            .rows
            .windows(2)
            .find(|w| (w[0].frame_id, w[0].id) == (w[1].frame_id, w[1].id))
        {
            return Err(DatabaseError::DuplicateRow {
                frame: w[0].frame_id,
                cell: w[0].id,
            });
        }
        Ok(())
    }

    pub fn rows(&self) -> &[CellRecord] {
        &self.rows
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    /// Largest cluster count per channel over all rows.
    pub fn max_clusters(&self) -> Vec<usize> {
        (0..self.channel_names.len())
            .map(|k| self.rows.iter().map(|r| r.channels[k].n_clusters()).max().unwrap_or(0))
            .collect()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = GEOMETRY_COLUMNS.iter().map(|s| s.to_string()).collect();
        for (name, &max) in self.channel_names.iter().zip(&self.max_clusters()) {
            h.push(format!("{name} cell mean intensity"));
            h.push(format!("{name} cell std intensity"));
            h.push(format!("{name} cell intensity CVI"));
            for axis in ProfileAxis::ALL {
                for agg in Aggregation::ALL {
                    h.push(format!("{name} {} {} intensity profile", axis.name(), agg.name()));
                }
            }
            h.push(format!("{name} number of clusters"));
            h.push(format!("{name} has clusters"));
            for i in 1..=max {
                for field in CLUSTER_FIELDS {
                    h.push(format!("{name} cluster {i} {field}"));
                }
            }
            h.push(format!("{name} leading cluster index"));
        }
        h
    }

    fn record_fields(&self, row: &CellRecord, max_clusters: &[usize]) -> Vec<String> {
        let m = &row.measurements;
        let mut out = vec![
            row.id.to_string(),
            row.frame_id.to_string(),
            fmt_um(m.length_um),
            fmt_um(m.width_um),
            fmt_um(m.area_um2),
            fmt_um(m.radius_um),
            fmt_um(m.circumference_um),
            fmt_um(m.surface_area_um2),
            fmt_um(m.volume_um3),
        ];
        for (stats, &max) in row.channels.iter().zip(max_clusters) {
            out.push(fmt_num(stats.mean));
            out.push(fmt_num(stats.std));
            out.push(stats.cvi.map(fmt_num).unwrap_or_default());
            for axis in ProfileAxis::ALL {
                for agg in Aggregation::ALL {
                    let p = stats.profiles.get(axis, agg);
                    out.push(p.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(";"));
                }
            }
            out.push(stats.n_clusters().to_string());
            out.push(stats.has_clusters().to_string());
            for i in 0..max {
                match stats.clusters.get(i) {
                    Some(k) => {
                        out.push(k.cluster_id.to_string());
                        out.push(fmt_um(k.size_um2));
                        out.push(format!("({:.4}, {:.4})", k.center.0, k.center.1));
                        out.push(k.is_polar.to_string());
                        out.push(fmt_num(k.mean));
                        out.push(fmt_num(k.std));
                        out.push(fmt_num(k.max));
                        out.push(fmt_num(k.sum));
                    }
                    None => out.extend(std::iter::repeat_n(String::new(), CLUSTER_FIELDS.len())),
                }
            }
            // 1-based, matching the cluster column numbering.
            out.push(
                stats
                    .leading_cluster_index
                    .map(|i| (i + 1).to_string())
                    .unwrap_or_default(),
            );
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatabaseError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header())?;
        let max = self.max_clusters();
        for row in &self.rows {
            w.write_record(self.record_fields(row, &max))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const GEOMETRY_COLUMNS: [&str; 9] = [
    "Id",
    "frame id",
    "length",
    "width",
    "area",
    "radius",
    "circumference",
    "surface area",
    "volume",
];

pub const CLUSTER_FIELDS: [&str; 8] = [
    "id",
    "size",
    "center",
    "is polar",
    "mean intensity",
    "std intensity",
    "max intensity",
    "sum intensity",
];

/// Shortest round-trip decimal.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v}")
}

/// Six significant digits, printed as the shortest decimal of the rounded value.
pub fn fmt_um(v: f64) -> String {
    if !v.is_finite() {
        return fmt_num(v);
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    fmt_num(rounded)
}
