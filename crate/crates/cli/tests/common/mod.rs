//! Synthetic frames: rod-shaped cells with one fluorescent cluster each.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cellanalyzer_core::imaging::{BinaryMask, BitDepth, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellanalyzer"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Pixel centers inside a rectangle of the given size and orientation.
pub fn rod_pixels(
    cy: f64,
    cx: f64,
    length: f64,
    width: f64,
    angle_deg: f64,
    h: usize,
    w: usize,
) -> Vec<(usize, usize)> {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let reach = (length + width) / 2.0 + 1.0;
    let mut px = Vec::new();
    let (r0, r1) = ((cy - reach).max(0.0) as usize, ((cy + reach) as usize).min(h - 1));
    let (c0, c1) = ((cx - reach).max(0.0) as usize, ((cx + reach) as usize).min(w - 1));
    for r in r0..=r1 {
        for col in c0..=c1 {
            let (dy, dx) = (r as f64 - cy, col as f64 - cx);
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            if u.abs() <= length / 2.0 && v.abs() <= width / 2.0 {
                px.push((r, col));
            }
        }
    }
    px
}

pub struct SyntheticFrame {
    pub cell_image: GrayImage,
    pub cell_mask: BinaryMask,
    pub fluor: GrayImage,
    pub clusters: BinaryMask,
    pub n_cells: usize,
}

/// Cells on a grid so they never touch; each carries one 3×3 cluster offset
/// along its long axis.
pub fn synthetic_frame(size: usize, n_cells: usize, seed: u64) -> SyntheticFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (n_cells as f64).sqrt().ceil() as usize;
    let rows = n_cells.div_ceil(cols);
    let (cell_h, cell_w) = (size as f64 / rows as f64, size as f64 / cols as f64);
    let mut cell_image = GrayImage::zeros(size, size, BitDepth::Sixteen);
    let mut fluor = GrayImage::zeros(size, size, BitDepth::Sixteen);
    let mut cell_mask = BinaryMask::blank(size, size);
    let mut clusters = BinaryMask::blank(size, size);
    for r in 0..size {
        for c in 0..size {
            cell_image.set(r, c, 1000 + rng.gen_range(0..200));
            fluor.set(r, c, 100 + rng.gen_range(0..50));
        }
    }
    let span = cell_h.min(cell_w);
    for k in 0..n_cells {
        let (gr, gc) = (k / cols, k % cols);
        let cy = (gr as f64 + 0.5) * cell_h + rng.gen_range(-2.0..2.0);
        let cx = (gc as f64 + 0.5) * cell_w + rng.gen_range(-2.0..2.0);
        let length = rng.gen_range(0.45..0.65) * span;
        let width = rng.gen_range(0.10..0.16) * span;
        let angle: f64 = rng.gen_range(0.0..180.0);
        for (r, c) in rod_pixels(cy, cx, length, width, angle, size, size) {
            cell_mask.set(r, c, true);
            cell_image.set(r, c, 3000 + rng.gen_range(0..300));
            fluor.set(r, c, 400 + rng.gen_range(0..100));
        }
        let offset = rng.gen_range(-0.3..0.3) * length;
        let (s, co) = angle.to_radians().sin_cos();
        let (ky, kx) = ((cy + offset * s).round() as usize, (cx + offset * co).round() as usize);
        for r in ky - 1..=ky + 1 {
            for c in kx - 1..=kx + 1 {
                clusters.set(r, c, true);
                fluor.set(r, c, 2000 + rng.gen_range(0..1000));
            }
        }
    }
    SyntheticFrame {
        cell_image,
        cell_mask,
        fluor,
        clusters,
        n_cells,
    }
}

/// Writes the frame's files under `dir` and returns its manifest entry.
pub fn write_frame(dir: &Path, frame_id: usize, f: &SyntheticFrame) -> Value {
    let name = |what: &str| format!("frame{frame_id}_{what}.png");
    f.cell_image.save_png(&dir.join(name("cells"))).unwrap();
    f.cell_mask.save_png(&dir.join(name("cell_mask"))).unwrap();
    f.fluor.save_png(&dir.join(name("gfp"))).unwrap();
    f.clusters.save_png(&dir.join(name("gfp_clusters"))).unwrap();
    json!({
        "frame_id": frame_id,
        "cell_image": name("cells"),
        "cell_mask": name("cell_mask"),
        "channels": [{"name": "gfp", "image": name("gfp"), "cluster_mask": name("gfp_clusters")}],
    })
}

pub fn write_manifest(dir: &Path, frames: Vec<Value>, config: Value) -> PathBuf {
    let path = dir.join("manifest.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&json!({"frames": frames, "config": config})).unwrap(),
    )
    .unwrap();
    path
}

/// A three-frame manifest of small synthetic frames.
pub fn three_frame_manifest(dir: &Path) -> PathBuf {
    let frames = (0..3)
        .map(|i| write_frame(dir, i, &synthetic_frame(256, 6 + i, 100 + i as u64)))
        .collect();
    write_manifest(dir, frames, json!({"pixel_size_um": 0.065}))
}
