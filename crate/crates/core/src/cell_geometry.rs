//! Rod-model cell geometry.
//!
//! Each cell gets a principal-axis frame (x along the major axis, y along the
//! minor axis, origin at the centroid) and a quadratic midline
//! `y = a·x² + b·x + c` fitted through cross-section centers. The cell is
//! then modelled as a capsule: every point within `radius` of a core segment
//! of the midline. The core ends `radius` inside each pole, so
//! `length = core arc length + 2·radius`.
//!
//! All computation happens in pixel units; physical units are applied at the
//! end so that scaling the pixel size scales the outputs exactly.

use log::warn;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::components::Component;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("component {id} has {area} pixels; at least 3 are needed to fit a frame")]
    TooSmall { id: u32, area: usize },
}

/// Principal-axis frame of a component. Vectors are `(row, col)` unit vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFrame {
    pub centroid: (f64, f64),
    pub major_axis: (f64, f64),
    pub minor_axis: (f64, f64),
    /// `(major, minor)` eigenvalues of the pixel-center covariance.
    pub eigenvalues: (f64, f64),
}

impl CellFrame {
    /// Frame coordinates `(x, y)` of a pixel center.
    #[inline]
    pub fn to_frame(&self, row: f64, col: f64) -> (f64, f64) {
        let dr = row - self.centroid.0;
        let dc = col - self.centroid.1;
        (
            dr * self.major_axis.0 + dc * self.major_axis.1,
            dr * self.minor_axis.0 + dc * self.minor_axis.1,
        )
    }

    /// Image `(row, col)` of a frame point.
    pub fn to_image(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.centroid.0 + x * self.major_axis.0 + y * self.minor_axis.0,
            self.centroid.1 + x * self.major_axis.1 + y * self.minor_axis.1,
        )
    }

    pub fn angle_degrees(&self) -> f64 {
        // Angle of the major axis measured from the column direction towards rows.
        self.major_axis.0.atan2(self.major_axis.1).to_degrees()
    }
}

/// Eigenvectors of the second central moments of the pixel centers (population
/// statistics). The major axis points towards increasing columns (rows on a tie);
/// an isotropic component gets the column direction.
pub fn fit_cell_frame(c: &Component) -> Result<CellFrame, GeometryError> {
    if c.area_px() < 3 {
        return Err(GeometryError::TooSmall {
            id: c.id(),
            area: c.area_px(),
        });
    }
    let (mr, mc) = c.centroid();
    let n = c.area_px() as f64;
    let (mut srr, mut scc, mut src) = (0.0, 0.0, 0.0);
    for &(r, col) in c.pixels() {
        let dr = r as f64 - mr;
        let dc = col as f64 - mc;
        srr += dr * dr;
        scc += dc * dc;
        src += dr * dc;
    }
    let (srr, scc, src) = (srr / n, scc / n, src / n);

    let half_trace = (srr + scc) / 2.0;
    let disc = (((scc - srr) / 2.0).powi(2) + src * src).sqrt();
    let (l1, l2) = (half_trace + disc, (half_trace - disc).max(0.0));

    let scale = srr.max(scc).max(f64::MIN_POSITIVE);
    let mut major = if disc <= 1e-12 * scale {
        (0.0, 1.0)
    } else if src.abs() <= 1e-12 * scale {
        if scc >= srr {
            (0.0, 1.0)
        } else {
            (1.0, 0.0)
        }
    } else {
        // (S - l1 I) v = 0 with S = [[scc, src], [src, srr]] in (col, row) order.
        let (vc, vr) = (src, l1 - scc);
        let norm = vc.hypot(vr);
        (vr / norm, vc / norm)
    };
    if major.1 < 0.0 || (major.1 == 0.0 && major.0 < 0.0) {
        major = (-major.0, -major.1);
    }
    let minor = (major.1, -major.0);
    Ok(CellFrame {
        centroid: (mr, mc),
        major_axis: major,
        minor_axis: minor,
        eigenvalues: (l1, l2),
    })
}

/// `y = a·x² + b·x + c` in frame coordinates over `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Midline {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Midline {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        2.0 * self.a * x + self.b
    }

    /// Same curve on a different interval.
    pub fn with_domain(&self, x_min: f64, x_max: f64) -> Midline {
        Midline { x_min, x_max, ..*self }
    }

    /// Distance from `(x0, y0)` to the curve restricted to the domain.
    pub fn distance_to(&self, x0: f64, y0: f64) -> f64 {
        self.closest_point(x0, y0).1
    }

    /// `(x, distance)` of the curve point nearest to `(x0, y0)` within the
    /// domain. Newton iteration on the stationarity condition of the squared
    /// distance, compared against both endpoints.
    pub fn closest_point(&self, x0: f64, y0: f64) -> (f64, f64) {
        let d2 = |x: f64| {
            let dy = self.eval(x) - y0;
            (x - x0) * (x - x0) + dy * dy
        };
        let mut x = x0.clamp(self.x_min, self.x_max);
        for _ in 0..50 {
            let f = self.eval(x) - y0;
            let fp = self.slope(x);
            let g = (x - x0) + f * fp;
            let h = 1.0 + fp * fp + f * 2.0 * self.a;
            if h <= 0.0 {
                break;
            }
            let next = (x - g / h).clamp(self.x_min, self.x_max);
            let done = (next - x).abs() <= 1e-9;
            x = next;
            if done {
                break;
            }
        }
        let (foot, best) =
            [x, self.x_min, self.x_max]
                .into_iter()
                .map(|t| (t, d2(t)))
                .fold(
                    (x, f64::INFINITY),
                    |best, cand| if cand.1 < best.1 { cand } else { best },
                );
        (foot, best.sqrt())
    }
}

/// Least-squares quadratic through per-bin mean positions. Pixels are binned
/// by unit-width slices along the major axis; each bin contributes its mean
/// `(x, y)`. Fewer than three bins gives the straight major axis.
pub fn fit_midline(c: &Component, frame: &CellFrame) -> Midline {
    let pts: Vec<(f64, f64)> = c
        .pixels()
        .iter()
        .map(|&(r, col)| frame.to_frame(r as f64, col as f64))
        .collect();
    let x_min = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);

    let nbins = ((x_max - x_min).floor() as usize) + 1;
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); nbins];
    for &(x, y) in &pts {
        let k = (((x - x_min).floor()) as usize).min(nbins - 1);
        sums[k].0 += x;
        sums[k].1 += y;
        sums[k].2 += 1;
    }
    let centers: Vec<(f64, f64)> = sums
        .iter()
        .filter(|s| s.2 > 0)
        .map(|&(sx, sy, n)| (sx / n as f64, sy / n as f64))
        .collect();

    let straight = Midline {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        x_min,
        x_max,
    };
    if centers.len() < 3 {
        return straight;
    }

    // Scale x to about [-1, 1] for conditioning, then undo the scaling.
    let s = (x_max - x_min).max(1.0) / 2.0;
    let design = DMatrix::from_fn(centers.len(), 3, |i, j| (centers[i].0 / s).powi(2 - j as i32));
    let rhs = DVector::from_iterator(centers.len(), centers.iter().map(|p| p.1));
    match design.svd(true, true).solve(&rhs, 1e-12) {
        Ok(sol) => Midline {
            a: sol[0] / (s * s),
            b: sol[1] / s,
            c: sol[2],
            x_min,
            x_max,
        },
        Err(_) => straight,
    }
}

/// Arc length of the midline over its domain, composite Simpson with 2048 panels.
pub fn arc_length(m: &Midline) -> f64 {
    const PANELS: usize = 2048;
    let (lo, hi) = (m.x_min, m.x_max);
    if hi <= lo {
        return 0.0;
    }
    let f = |x: f64| (1.0 + m.slope(x).powi(2)).sqrt();
    let h = (hi - lo) / PANELS as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..PANELS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + i as f64 * h);
    }
    sum * h / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMeasurements {
    pub length_um: f64,
    pub width_um: f64,
    pub area_um2: f64,
    pub radius_um: f64,
    pub circumference_um: f64,
    pub surface_area_um2: f64,
    pub volume_um3: f64,
}

/// Capsule shape in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodShape {
    pub radius: f64,
    pub length: f64,
    /// Midline restricted to the capsule core.
    pub core: Midline,
}

/// Spherocylinder surface and volume from total length and radius.
pub fn spherocylinder(length: f64, radius: f64) -> (f64, f64) {
    use std::f64::consts::PI;
    let lc = (length - 2.0 * radius).max(0.0);
    let surface = 2.0 * PI * radius * lc + 4.0 * PI * radius * radius;
    let volume = PI * radius * radius * lc + 4.0 / 3.0 * PI * radius.powi(3);
    (surface, volume)
}

/// Fits the capsule radius by fixed-point iteration. The radius is the mean
/// perpendicular distance from boundary pixels to the core segment plus half a
/// pixel (boundary pixel centers sit half a pixel inside the outline). Only
/// pixels whose nearest core point is interior contribute, so the pole caps do
/// not bias the estimate; if there are none (round cells) all boundary pixels
/// are used. The core is the midline shrunk by the radius at both poles of the
/// pixel-edge extent.
pub fn fit_rod(c: &Component, frame: &CellFrame, midline: &Midline) -> RodShape {
    let boundary: Vec<(f64, f64)> = c
        .boundary_pixels()
        .iter()
        .map(|&(r, col)| frame.to_frame(r as f64, col as f64))
        .collect();
    let lo = midline.x_min - 0.5;
    let hi = midline.x_max + 0.5;
    let mid = (lo + hi) / 2.0;
    let core_for = |r: f64| {
        let (a, b) = if hi - lo > 2.0 * r {
            (lo + r, hi - r)
        } else {
            (mid, mid)
        };
        midline.with_domain(a, b)
    };
    let mean_distance = |core: &Midline| {
        let (mut lateral, mut n_lateral, mut all) = (0.0, 0usize, 0.0);
        for &(x, y) in &boundary {
            let (foot, d) = core.closest_point(x, y);
            all += d;
            if foot > core.x_min && foot < core.x_max {
                lateral += d;
                n_lateral += 1;
            }
        }
        let mean = if n_lateral > 0 {
            lateral / n_lateral as f64
        } else {
            all / boundary.len() as f64
        };
        mean + 0.5
    };

    // Start from the widest cross-section estimate.
    let mut radius = (frame.eigenvalues.1 * 3.0).sqrt().max(0.5);
    for _ in 0..30 {
        let next = mean_distance(&core_for(radius));
        let done = (next - radius).abs() <= 1e-9;
        radius = next;
        if done {
            break;
        }
    }
    let core = core_for(radius);
    RodShape {
        radius,
        length: arc_length(&core) + 2.0 * radius,
        core,
    }
}

/// Outer outline length by marching squares at iso-level 0.5 over pixel
/// centers, with interior holes filled first.
pub fn contour_length(c: &Component) -> f64 {
    let (r0, c0, r1, c1) = c.bbox();
    // One pixel of background padding on every side.
    let h = r1 - r0 + 3;
    let w = c1 - c0 + 3;
    let mut inside = vec![false; h * w];
    for &(r, col) in c.pixels() {
        inside[(r - r0 + 1) * w + (col - c0 + 1)] = true;
    }

    // Fill holes: background not reachable from the padding border.
    let mut outside = vec![false; h * w];
    let mut stack = vec![0usize];
    outside[0] = true;
    while let Some(i) = stack.pop() {
        let (r, col) = (i / w, i % w);
        let mut visit = |j: usize| {
            if !inside[j] && !outside[j] {
                outside[j] = true;
                stack.push(j);
            }
        };
        if r > 0 {
            visit(i - w);
        }
        if r + 1 < h {
            visit(i + w);
        }
        if col > 0 {
            visit(i - 1);
        }
        if col + 1 < w {
            visit(i + 1);
        }
    }
    let filled = |r: usize, col: usize| !outside[r * w + col];

    let diag = std::f64::consts::FRAC_1_SQRT_2;
    let mut total = 0.0;
    for r in 0..h - 1 {
        for col in 0..w - 1 {
            let tl = filled(r, col);
            let tr = filled(r, col + 1);
            let bl = filled(r + 1, col);
            let br = filled(r + 1, col + 1);
            let count = [tl, tr, bl, br].iter().filter(|&&b| b).count();
            total += match count {
                1 | 3 => diag,
                2 if tl == br => 2.0 * diag, // saddle: either resolution gives two corner cuts
                2 => 1.0,
                _ => 0.0,
            };
        }
    }
    total
}

/// Physical measurements of one cell under the rod model.
pub fn measure_cell(c: &Component, midline: &Midline, frame: &CellFrame, pixel_size_um: f64) -> CellMeasurements {
    let rod = fit_rod(c, frame, midline);
    let perimeter = contour_length(c);
    let (surface, volume) = spherocylinder(rod.length, rod.radius);
    if rod.length < 2.0 * rod.radius - 1e-9 {
        warn!(
            "cell {}: length {:.3}px shorter than width {:.3}px",
            c.id(),
            rod.length,
            2.0 * rod.radius
        );
    }
    let s = pixel_size_um;
    let s2 = s * s;
    let s3 = s2 * s;
    CellMeasurements {
        length_um: rod.length * s,
        width_um: 2.0 * rod.radius * s,
        area_um2: c.area_px() as f64 * s2,
        radius_um: rod.radius * s,
        circumference_um: perimeter * s,
        surface_area_um2: surface * s2,
        volume_um3: volume * s3,
    }
}

/// Frame, midline and measurements in one call.
pub fn measure_component(
    c: &Component,
    pixel_size_um: f64,
) -> Result<(CellFrame, Midline, CellMeasurements), GeometryError> {
    let frame = fit_cell_frame(c)?;
    let midline = fit_midline(c, &frame);
    let m = measure_cell(c, &midline, &frame, pixel_size_um);
    Ok((frame, midline, m))
}
