//! Object-level scoring of a predicted segmentation against two ground truths.
//!
//! Components of two segmentations *intersect* when their IoU is at least
//! the threshold `T`. With `T > 0.5` a component can intersect at most one
//! component of the other segmentation, so matches are unique and false
//! positives/negatives are simply the unmatched components on each side.
//!
//! The l_ex-error of a prediction against ground truth `G_i` is
//!
//! ```text
//! l_ex(pd, G_i) = (β·FP(pd, G_i) + (1 − β)·FN(pd, G_i)) / |objects(G_1) ∪ objects(G_2)|
//! ```
//!
//! where the denominator counts the distinct objects across both ground
//! truths (matched pairs counted once). The experimental distance `d_ex`
//! averages the two ground truths' mutual l_ex-errors, which reduces to
//! `disagreed / (2·union)` independent of β. A prediction is valid when its
//! average l_ex over both ground truths does not exceed `d_ex`.

use std::io::Write;

use thiserror::Error;

use crate::components::{Component, ComponentSet};
use crate::imaging::BinaryMask;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("IoU threshold must lie in (0.5, 1], got {0}")]
    Threshold(f64),
    #[error("beta must lie in [0, 1], got {0}")]
    Beta(f64),
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("ground-truth pair has no objects; l_ex is undefined")]
    EmptyGroundTruth,
    #[error("ground-truth pair was matched at T={pair}, config uses T={config}")]
    ThresholdMismatch { pair: f64, config: f64 },
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("eps must lie in (0, 0.5), got {0}")]
    Epsilon(f64),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Intersection threshold `T` and false-positive weight `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    iou_threshold: f64,
    beta: f64,
}

impl EvalConfig {
    pub const CELL: EvalConfig = EvalConfig {
        iou_threshold: 0.8,
        beta: 0.7,
    };
    pub const FLUOR: EvalConfig = EvalConfig {
        iou_threshold: 0.6,
        beta: 0.15,
    };

    pub fn new(iou_threshold: f64, beta: f64) -> Result<Self> {
        check_threshold(iou_threshold)?;
        if !(0.0..=1.0).contains(&beta) {
            return Err(EvalError::Beta(beta));
        }
        Ok(Self { iou_threshold, beta })
    }

    pub fn iou_threshold(&self) -> f64 {
        self.iou_threshold
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.5 && t <= 1.0 {
        Ok(())
    } else {
        Err(EvalError::Threshold(t))
    }
}

fn check_dims(a: &ComponentSet, b: &ComponentSet) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(EvalError::DimensionMismatch(a.dims(), b.dims()));
    }
    Ok(())
}

pub fn iou(c1: &Component, c2: &Component) -> f64 {
    let inter = c1.intersection_size(c2);
    let union = c1.area_px() + c2.area_px() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub a: usize,
    pub b: usize,
    pub iou: f64,
}

/// Indices refer to positions in the component sets passed to [`match_components`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchTable {
    pub pairs: Vec<MatchPair>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

impl MatchTable {
    pub fn matched(&self) -> usize {
        self.pairs.len()
    }
}

/// All pairs with IoU ≥ `t`. Overlaps are found through a label map of `b`,
/// so the cost is linear in the foreground size.
pub fn match_components(a: &ComponentSet, b: &ComponentSet, t: f64) -> Result<MatchTable> {
    check_threshold(t)?;
    check_dims(a, b)?;
    let (_, width) = b.dims();
    let b_index = b.index_map();
    let mut partner_a: Vec<Option<usize>> = vec![None; a.len()];
    let mut partner_b: Vec<Option<usize>> = vec![None; b.len()];
    let mut pairs = Vec::new();

    let mut overlap: Vec<(usize, usize)> = Vec::new();
    for (ia, ca) in a.iter().enumerate() {
        overlap.clear();
        for &(r, c) in ca.pixels() {
            let ib = b_index[r * width + c];
            if ib == 0 {
                continue;
            }
            let ib = ib as usize - 1;
            match overlap.iter_mut().find(|(k, _)| *k == ib) {
                Some((_, n)) => *n += 1,
                None => overlap.push((ib, 1)),
            }
        }
        for &(ib, inter) in &overlap {
            let union = ca.area_px() + b.components()[ib].area_px() - inter;
            let score = inter as f64 / union as f64;
            if score >= t {
                // T > 0.5 makes these unique; a second hit would mean overlapping components.
                debug_assert!(partner_a[ia].is_none() && partner_b[ib].is_none());
                partner_a[ia] = Some(ib);
                partner_b[ib] = Some(ia);
                pairs.push(MatchPair {
                    a: ia,
                    b: ib,
                    iou: score,
                });
            }
        }
    }

    Ok(MatchTable {
        pairs,
        unmatched_a: (0..a.len()).filter(|&i| partner_a[i].is_none()).collect(),
        unmatched_b: (0..b.len()).filter(|&i| partner_b[i].is_none()).collect(),
    })
}

/// TP/FP/FN of a prediction against one ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ObjectCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ObjectCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        Self { tp, fp, fn_ }
    }

    fn from_table(t: &MatchTable) -> Self {
        Self {
            tp: t.pairs.len(),
            fp: t.unmatched_a.len(),
            fn_: t.unmatched_b.len(),
        }
    }
}

/// `(fp, fn)` of `pd` against `gt`.
pub fn unmatched_counts(pd: &ComponentSet, gt: &ComponentSet, t: f64) -> Result<(usize, usize)> {
    let table = match_components(pd, gt, t)?;
    Ok((table.unmatched_a.len(), table.unmatched_b.len()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall and F_β; every 0/0 is 0.
pub fn detection_metrics(counts: ObjectCounts, f_beta: f64) -> DetectionMetrics {
    let tp = counts.tp as f64;
    let precision = ratio(tp, tp + counts.fp as f64);
    let recall = ratio(tp, tp + counts.fn_ as f64);
    let b2 = f_beta * f_beta;
    let f_score = ratio((1.0 + b2) * precision * recall, b2 * precision + recall);
    DetectionMetrics {
        precision,
        recall,
        f_score,
    }
}

/// The β-weighted unmatched count over the object-union size.
pub fn l_ex_from_counts(fp: usize, fn_: usize, union_size: usize, beta: f64) -> f64 {
    (beta * fp as f64 + (1.0 - beta) * fn_ as f64) / union_size as f64
}

/// `disagreed / (2·union)`: the β-free form of the experimental distance.
pub fn d_ex_from_counts(disagreed: usize, union_size: usize) -> f64 {
    disagreed as f64 / (2 * union_size) as f64
}

/// Two independent ground truths of the same image, matched once.
#[derive(Debug, Clone)]
pub struct GroundTruthPair {
    g1: ComponentSet,
    g2: ComponentSet,
    gt_match: MatchTable,
    union_size: usize,
    iou_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundTruth {
    First,
    Second,
}

impl GroundTruthPair {
    pub fn new(g1: ComponentSet, g2: ComponentSet, iou_threshold: f64) -> Result<Self> {
        let gt_match = match_components(&g1, &g2, iou_threshold)?;
        let union_size = g1.len() + g2.len() - gt_match.matched();
        if union_size == 0 {
            return Err(EvalError::EmptyGroundTruth);
        }
        Ok(Self {
            g1,
            g2,
            gt_match,
            union_size,
            iou_threshold,
        })
    }

    pub fn g1(&self) -> &ComponentSet {
        &self.g1
    }

    pub fn g2(&self) -> &ComponentSet {
        &self.g2
    }

    pub fn get(&self, which: GroundTruth) -> &ComponentSet {
        match which {
            GroundTruth::First => &self.g1,
            GroundTruth::Second => &self.g2,
        }
    }

    pub fn gt_match(&self) -> &MatchTable {
        &self.gt_match
    }

    /// `|objects(G1) ∪ objects(G2)|`, matched pairs counted once.
    pub fn union_size(&self) -> usize {
        self.union_size
    }

    /// Objects present in exactly one of the two ground truths.
    pub fn disagreed(&self) -> usize {
        self.gt_match.unmatched_a.len() + self.gt_match.unmatched_b.len()
    }

    pub fn iou_threshold(&self) -> f64 {
        self.iou_threshold
    }

    fn check_config(&self, cfg: &EvalConfig) -> Result<()> {
        if self.iou_threshold != cfg.iou_threshold {
            return Err(EvalError::ThresholdMismatch {
                pair: self.iou_threshold,
                config: cfg.iou_threshold,
            });
        }
        Ok(())
    }
}

fn counts_against(
    pd: &ComponentSet,
    pair: &GroundTruthPair,
    which: GroundTruth,
    cfg: &EvalConfig,
) -> Result<ObjectCounts> {
    pair.check_config(cfg)?;
    let table = match_components(pd, pair.get(which), cfg.iou_threshold)?;
    Ok(ObjectCounts::from_table(&table))
}

pub fn l_ex_error(pd: &ComponentSet, which: GroundTruth, pair: &GroundTruthPair, cfg: &EvalConfig) -> Result<f64> {
    let c = counts_against(pd, pair, which, cfg)?;
    Ok(l_ex_from_counts(c.fp, c.fn_, pair.union_size, cfg.beta))
}

/// Average of the two ground truths' mutual l_ex-errors, evaluated literally.
pub fn d_ex_averaged(pair: &GroundTruthPair, cfg: &EvalConfig) -> Result<f64> {
    pair.check_config(cfg)?;
    let u = pair.union_size;
    // G2 scored against G1 swaps the roles of FP and FN.
    let only_g1 = pair.gt_match.unmatched_a.len();
    let only_g2 = pair.gt_match.unmatched_b.len();
    let l12 = l_ex_from_counts(only_g1, only_g2, u, cfg.beta);
    let l21 = l_ex_from_counts(only_g2, only_g1, u, cfg.beta);
    Ok((l12 + l21) / 2.0)
}

/// Experimental distance between the two ground truths. The β terms of the
/// mutual l_ex-errors cancel, so this is computed in the exact β-free form
/// and is bit-identical for every β and for either ground-truth order.
pub fn d_ex_distance(pair: &GroundTruthPair, cfg: &EvalConfig) -> Result<f64> {
    pair.check_config(cfg)?;
    Ok(d_ex_symmetric_difference(pair))
}

/// The symmetric-difference form of `d_ex`, independent of β.
pub fn d_ex_symmetric_difference(pair: &GroundTruthPair) -> f64 {
    d_ex_from_counts(pair.disagreed(), pair.union_size)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtScore {
    pub counts: ObjectCounts,
    pub metrics: DetectionMetrics,
    pub l_ex: f64,
}

/// One row of a scoring table: per-ground-truth counts and metrics plus the
/// shared denominator, `d_ex` and the validity verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_gt: [GtScore; 2],
    pub union_size: usize,
    pub d_ex: f64,
    pub avg_l_ex: f64,
    pub valid: bool,
    pub config: EvalConfig,
}

/// F-score weight used in reports (F2).
pub const REPORT_F_BETA: f64 = 2.0;

impl EvalReport {
    /// Builds a report directly from counts, for when only tabulated counts
    /// are available.
    pub fn from_counts(counts: [ObjectCounts; 2], union_size: usize, d_ex: f64, config: EvalConfig) -> Result<Self> {
        if union_size == 0 {
            return Err(EvalError::EmptyGroundTruth);
        }
        let score = |c: ObjectCounts| GtScore {
            counts: c,
            metrics: detection_metrics(c, REPORT_F_BETA),
            l_ex: l_ex_from_counts(c.fp, c.fn_, union_size, config.beta),
        };
        let per_gt = [score(counts[0]), score(counts[1])];
        let avg_l_ex = (per_gt[0].l_ex + per_gt[1].l_ex) / 2.0;
        Ok(Self {
            per_gt,
            union_size,
            d_ex,
            avg_l_ex,
            valid: avg_l_ex <= d_ex,
            config,
        })
    }

    pub const CSV_HEADER: [&'static str; 19] = [
        "TP (GT1)",
        "FP (GT1)",
        "FN (GT1)",
        "Precision (GT1)",
        "Recall (GT1)",
        "F2-Score (GT1)",
        "l_ex (GT1)",
        "TP (GT2)",
        "FP (GT2)",
        "FN (GT2)",
        "Precision (GT2)",
        "Recall (GT2)",
        "F2-Score (GT2)",
        "l_ex (GT2)",
        "Avg. l_ex",
        "d_ex",
        "valid",
        "iou threshold",
        "beta",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(Self::CSV_HEADER.len());
        for s in &self.per_gt {
            out.push(s.counts.tp.to_string());
            out.push(s.counts.fp.to_string());
            out.push(s.counts.fn_.to_string());
            out.push(s.metrics.precision.to_string());
            out.push(s.metrics.recall.to_string());
            out.push(s.metrics.f_score.to_string());
            out.push(s.l_ex.to_string());
        }
        out.push(self.avg_l_ex.to_string());
        out.push(self.d_ex.to_string());
        out.push(self.valid.to_string());
        out.push(self.config.iou_threshold.to_string());
        out.push(self.config.beta.to_string());
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_record())?;
        w.flush()?;
        Ok(())
    }
}

/// Scores `pd` against both ground truths and decides validity.
pub fn validity(pd: &ComponentSet, pair: &GroundTruthPair, cfg: &EvalConfig) -> Result<EvalReport> {
    let c1 = counts_against(pd, pair, GroundTruth::First, cfg)?;
    let c2 = counts_against(pd, pair, GroundTruth::Second, cfg)?;
    let d_ex = d_ex_distance(pair, cfg)?;
    EvalReport::from_counts([c1, c2], pair.union_size, d_ex, *cfg)
}

/// Per-pixel prediction probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(EvalError::DimensionMismatch((height, width), (values.len(), 1)));
        }
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EvalError::Probability(v));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            values: mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check(&self, g: &BinaryMask) -> Result<()> {
        if self.width != g.width() || self.height != g.height() {
            return Err(EvalError::DimensionMismatch(
                (self.height, self.width),
                (g.height(), g.width()),
            ));
        }
        Ok(())
    }
}

pub const DEFAULT_BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy with probabilities clamped to `[eps, 1 − eps]`.
pub fn pixel_bce(pr: &ProbabilityMap, g: &BinaryMask, eps: f64) -> Result<f64> {
    pr.check(g)?;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(EvalError::Epsilon(eps));
    }
    let n = pr.values.len();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = pr
        .values
        .iter()
        .zip(g.bits())
        .map(|(&p, &t)| {
            let p = p.clamp(eps, 1.0 - eps);
            if t {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / n as f64)
}

/// Soft Jaccard loss; 0 when both maps are empty.
pub fn pixel_jaccard_loss(pr: &ProbabilityMap, g: &BinaryMask) -> Result<f64> {
    pr.check(g)?;
    let (mut inter, mut sum_p, mut sum_g) = (0.0, 0.0, 0.0);
    for (&p, &t) in pr.values.iter().zip(g.bits()) {
        sum_p += p;
        if t {
            sum_g += 1.0;
            inter += p;
        }
    }
    let union = sum_p + sum_g - inter;
    if union == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - inter / union)
}
