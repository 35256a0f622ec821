//! Implementation-independent oracles checked against the library on random inputs.

use cellanalyzer_core::cell_analyzer::{filter_by_proximity, AnalysisConfig};
use cellanalyzer_core::components::{label_components, ComponentSet};
use cellanalyzer_core::eval::{iou, match_components, pixel_bce, pixel_jaccard_loss, ProbabilityMap};
use cellanalyzer_core::fluor_analysis::cell_intensity_stats;
use cellanalyzer_core::imaging::{
    render_diff, BinaryMask, GrayImage, DIFF_BOTH, DIFF_NEITHER, DIFF_ONLY_A, DIFF_ONLY_B,
};
use cellanalyzer_core::thresholding::histogram;
use cellanalyzer_core::Component;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::new(w, h, (0..w * h).map(|_| rng.gen_bool(density)).collect()).unwrap()
}

/// Recursive flood fill, labels in raster order of first pixel.
fn flood_fill_labels(mask: &BinaryMask) -> (usize, Vec<u32>) {
    fn fill(mask: &BinaryMask, labels: &mut [u32], r: usize, c: usize, id: u32) {
        let (w, h) = (mask.width(), mask.height());
        if !mask.get(r, c) || labels[r * w + c] != 0 {
            return;
        }
        labels[r * w + c] = id;
        if r > 0 {
            fill(mask, labels, r - 1, c, id);
        }
        if r + 1 < h {
            fill(mask, labels, r + 1, c, id);
        }
        if c > 0 {
            fill(mask, labels, r, c - 1, id);
        }
        if c + 1 < w {
            fill(mask, labels, r, c + 1, id);
        }
    }
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0;
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) && labels[r * w + c] == 0 {
                next += 1;
                fill(mask, &mut labels, r, c, next);
            }
        }
    }
    (next as usize, labels)
}

#[test]
fn labelling_matches_flood_fill() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let m = random_mask(&mut rng, 64, 64, 0.3);
        let (n, labels) = flood_fill_labels(&m);
        let set = label_components(&m);
        assert_eq!(set.len(), n);
        assert_eq!(set.label_map(), labels);
        assert_eq!(set.total_area(), m.count_foreground());
    }
}

/// Brute-force all-pairs IoU scan with a pixel-set IoU.
fn brute_unmatched(a: &ComponentSet, b: &ComponentSet, t: f64) -> (usize, usize) {
    let set_iou = |x: &Component, y: &Component| {
        let xs: std::collections::HashSet<_> = x.pixels().iter().collect();
        let ys: std::collections::HashSet<_> = y.pixels().iter().collect();
        xs.intersection(&ys).count() as f64 / xs.union(&ys).count() as f64
    };
    let fp = a.iter().filter(|x| !b.iter().any(|y| set_iou(x, y) >= t)).count();
    let fn_ = b.iter().filter(|y| !a.iter().any(|x| set_iou(x, y) >= t)).count();
    (fp, fn_)
}

#[test]
fn matching_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let base = random_mask(&mut rng, 24, 24, 0.35);
        // Perturb a few pixels so some components still match.
        let mut other = base.clone();
        for _ in 0..rng.gen_range(0..30) {
            let (r, c) = (rng.gen_range(0..24), rng.gen_range(0..24));
            other.set(r, c, !other.get(r, c));
        }
        let a = label_components(&base);
        let b = label_components(&other);
        for t in [0.6, 0.8, 1.0] {
            let table = match_components(&a, &b, t).unwrap();
            assert_eq!(
                (table.unmatched_a.len(), table.unmatched_b.len()),
                brute_unmatched(&a, &b, t)
            );
            for p in &table.pairs {
                assert!((p.iou - iou(a.get(p.a).unwrap(), b.get(p.b).unwrap())).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn diff_render_class_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_mask(&mut rng, 40, 30, 0.5);
    let b = random_mask(&mut rng, 40, 30, 0.5);
    let img = render_diff(&a, &b).unwrap();
    let mut counts = [0usize; 4];
    let mut expected = [0usize; 4];
    for r in 0..30 {
        for c in 0..40 {
            let px = img.get(r, c);
            let k = [DIFF_ONLY_A, DIFF_ONLY_B, DIFF_BOTH, DIFF_NEITHER]
                .iter()
                .position(|&x| x == px)
                .unwrap();
            counts[k] += 1;
            let e = match (a.get(r, c), b.get(r, c)) {
                (true, false) => 0,
                (false, true) => 1,
                (true, true) => 2,
                (false, false) => 3,
            };
            expected[e] += 1;
        }
    }
    assert_eq!(counts, expected);
}

#[test]
fn histogram_matches_tally() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let px: Vec<u8> = (0..37 * 23).map(|_| rng.gen()).collect();
    let h = histogram(&GrayImage::from_u8(37, 23, &px).unwrap()).unwrap();
    for v in 0..=255u8 {
        assert_eq!(h.counts()[v as usize], px.iter().filter(|&&p| p == v).count() as u64);
    }
}

#[test]
fn pixel_losses_match_naive_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let vals: Vec<f64> = (0..64).map(|_| rng.gen::<f64>()).collect();
        let g = random_mask(&mut rng, 8, 8, 0.5);
        let pr = ProbabilityMap::new(8, 8, vals.clone()).unwrap();
        let eps = 1e-7;
        let mut h = 0.0;
        let (mut inter, mut sp, mut sg) = (0.0, 0.0, 0.0);
        for r in 0..8 {
            for c in 0..8 {
                let p = vals[r * 8 + c].clamp(eps, 1.0 - eps);
                let t = if g.get(r, c) { 1.0 } else { 0.0 };
                h -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
                inter += vals[r * 8 + c] * t;
                sp += vals[r * 8 + c];
                sg += t;
            }
        }
        h /= 64.0;
        let dj = 1.0 - inter / (sp + sg - inter);
        assert!((pixel_bce(&pr, &g, eps).unwrap() - h).abs() < 1e-12);
        assert!((pixel_jaccard_loss(&pr, &g).unwrap() - dj).abs() < 1e-12);
    }
}

#[test]
fn intensity_stats_match_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let px: Vec<u8> = (0..20 * 20).map(|_| rng.gen()).collect();
    let img = GrayImage::from_u8(20, 20, &px).unwrap();
    let cell = Component::from_pixels(1, (3..15).flat_map(|r| (4..9).map(move |c| (r, c))).collect()).unwrap();
    let mut sum = 0.0;
    let mut n = 0.0;
    for r in 3..15 {
        for c in 4..9 {
            sum += px[r * 20 + c] as f64;
            n += 1.0;
        }
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for r in 3..15 {
        for c in 4..9 {
            ss += (px[r * 20 + c] as f64 - mean).powi(2);
        }
    }
    let (m, s) = cell_intensity_stats(&cell, &img);
    assert!((m - mean).abs() < 1e-12);
    assert!((s - (ss / n).sqrt()).abs() < 1e-12);
}

/// All pixel pairs, no boundary shortcut and no bounding-box pruning.
fn brute_proximity(cells: &ComponentSet, gap: f64) -> Vec<u32> {
    let comps = cells.components();
    let mut drop = vec![false; comps.len()];
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            let mut best = f64::INFINITY;
            for &(r1, c1) in comps[i].pixels() {
                for &(r2, c2) in comps[j].pixels() {
                    let d = ((r1 as f64 - r2 as f64).powi(2) + (c1 as f64 - c2 as f64).powi(2)).sqrt();
                    best = best.min(d);
                }
            }
            if best - 1.0 < gap {
                drop[i] = true;
                drop[j] = true;
            }
        }
    }
    comps
        .iter()
        .zip(drop)
        .filter(|(_, d)| !d)
        .map(|(c, _)| c.id())
        .collect()
}

#[test]
fn proximity_matches_all_pairs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..40 {
        let m = random_mask(&mut rng, 40, 40, 0.08);
        let cells = label_components(&m);
        for gap in [1.0, 2.0, 3.5] {
            let cfg = AnalysisConfig {
                min_gap_px: gap,
                ..AnalysisConfig::default()
            };
            let kept: Vec<u32> = filter_by_proximity(&cells, &cfg).iter().map(|c| c.id()).collect();
            assert_eq!(kept, brute_proximity(&cells, gap));
        }
    }
}

#[test]
fn proximity_chain_removes_all_three() {
    // A–B and B–C are one pixel apart, A–C are far apart.
    let rows = ["###.###.###"];
    let bits = rows.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect();
    let cells = label_components(&BinaryMask::new(11, 1, bits).unwrap());
    assert_eq!(brute_proximity(&cells, 2.0), Vec::<u32>::new());
    assert!(filter_by_proximity(&cells, &AnalysisConfig::default()).is_empty());
}
