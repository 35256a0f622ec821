//! Global histogram thresholds: Kittler–Illingworth minimum error and Yen's
//! maximum correlation. Both scan every candidate level.

use thiserror::Error;

use crate::imaging::{BinaryMask, BitDepth, GrayImage};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ThresholdError {
    #[error("degenerate histogram: fewer than two distinct occupied levels")]
    DegenerateHistogram,
    #[error("thresholding needs an 8-bit image")]
    NotEightBit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    counts: [u64; 256],
    total: u64,
}

impl Histogram256 {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn occupied_levels(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Counts divided by their greatest common divisor. Histograms that differ
    /// only by a scale factor reduce to the same counts.
    fn reduced(&self) -> [u64; 256] {
        let g = self.counts.iter().fold(0u64, |g, &c| gcd(g, c));
        if g <= 1 {
            return self.counts;
        }
        let mut out = self.counts;
        out.iter_mut().for_each(|c| *c /= g);
        out
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn histogram(img: &GrayImage) -> Result<Histogram256, ThresholdError> {
    if img.bit_depth() != BitDepth::Eight {
        return Err(ThresholdError::NotEightBit);
    }
    let mut counts = [0u64; 256];
    for &v in img.pixels() {
        counts[v as usize] += 1;
    }
    Ok(Histogram256::from_counts(counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMethod {
    MinimumError,
    Yen,
}

/// Minimum-error criterion for a split into levels `≤ t` and `> t`:
///
/// `J(t) = 1 + 2(P1 ln σ1 + P2 ln σ2) − 2(P1 ln P1 + P2 ln P2)`
///
/// `None` when a class is empty or has zero variance.
fn minimum_error_criterion(cum: &Cumulative, t: usize) -> Option<f64> {
    let n1 = cum.n[t];
    let n2 = cum.total_n - n1;
    if n1 == 0 || n2 == 0 {
        return None;
    }
    let s1 = cum.s1[t];
    let s2 = cum.s2[t];
    let (t1, t2) = (cum.total_s1 - s1, cum.total_s2 - s2);
    // n·Σv² − (Σv)² is n²σ², exact in integers.
    let spread1 = n1 as u128 * s2 - s1 * s1;
    let spread2 = n2 as u128 * t2 - t1 * t1;
    if spread1 == 0 || spread2 == 0 {
        return None;
    }
    let var1 = spread1 as f64 / (n1 as f64 * n1 as f64);
    let var2 = spread2 as f64 / (n2 as f64 * n2 as f64);
    let p1 = n1 as f64 / cum.total_n as f64;
    let p2 = n2 as f64 / cum.total_n as f64;
    Some(1.0 + (p1 * var1.ln() + p2 * var2.ln()) - 2.0 * (p1 * p1.ln() + p2 * p2.ln()))
}

/// Yen's correlation criterion, to be maximised:
///
/// `TC(t) = −ln(Σ_{≤t} p²/P1²) − ln(Σ_{>t} p²/P2²)`
fn yen_criterion(cum: &Cumulative, t: usize) -> Option<f64> {
    let n1 = cum.n[t];
    let n2 = cum.total_n - n1;
    if n1 == 0 || n2 == 0 {
        return None;
    }
    let q1 = cum.sq[t];
    let q2 = cum.total_sq - q1;
    let r1 = q1 as f64 / (n1 as f64 * n1 as f64);
    let r2 = q2 as f64 / (n2 as f64 * n2 as f64);
    Some(-r1.ln() - r2.ln())
}

/// Integer prefix sums over levels `0..=t`.
struct Cumulative {
    n: [u64; 256],
    s1: [u128; 256],
    s2: [u128; 256],
    sq: [u128; 256],
    total_n: u64,
    total_s1: u128,
    total_s2: u128,
    total_sq: u128,
}

impl Cumulative {
    fn new(counts: &[u64; 256]) -> Self {
        let mut c = Cumulative {
            n: [0; 256],
            s1: [0; 256],
            s2: [0; 256],
            sq: [0; 256],
            total_n: 0,
            total_s1: 0,
            total_s2: 0,
            total_sq: 0,
        };
        for (v, &k) in counts.iter().enumerate() {
            let (v, k128) = (v as u128, k as u128);
            c.total_n += k;
            c.total_s1 += v * k128;
            c.total_s2 += v * v * k128;
            c.total_sq += k128 * k128;
            c.n[v as usize] = c.total_n;
            c.s1[v as usize] = c.total_s1;
            c.s2[v as usize] = c.total_s2;
            c.sq[v as usize] = c.total_sq;
        }
        c
    }
}

/// Picks the best-scoring level; ties resolve to the middle of the first run
/// of consecutive tied levels. When every split is degenerate (e.g. the
/// histogram is a set of isolated spikes), all non-empty splits tie.
fn select_level(cum: &Cumulative, score: impl Fn(usize) -> Option<f64>, minimise: bool) -> u8 {
    let scores: Vec<Option<f64>> = (0..255).map(&score).collect();
    let better = |a: f64, b: f64| if minimise { a < b } else { a > b };
    let best = scores
        .iter()
        .flatten()
        .copied()
        .fold(None, |acc: Option<f64>, s| match acc {
            Some(b) if !better(s, b) => Some(b),
            _ => Some(s),
        });
    let is_best: Vec<bool> = match best {
        Some(b) => scores.iter().map(|s| *s == Some(b)).collect(),
        None => (0..255).map(|t| cum.n[t] > 0 && cum.n[t] < cum.total_n).collect(),
    };
    let start = is_best
        .iter()
        .position(|&b| b)
        .expect("at least one split is non-empty");
    let len = is_best[start..].iter().take_while(|&&b| b).count();
    (start + (len - 1) / 2) as u8
}

/// Threshold level in `0..=254`; foreground is conventionally `v > level`.
pub fn compute_threshold(hist: &Histogram256, method: ThresholdMethod) -> Result<u8, ThresholdError> {
    if hist.occupied_levels() < 2 {
        return Err(ThresholdError::DegenerateHistogram);
    }
    let cum = Cumulative::new(&hist.reduced());
    Ok(match method {
        ThresholdMethod::MinimumError => select_level(&cum, |t| minimum_error_criterion(&cum, t), true),
        ThresholdMethod::Yen => select_level(&cum, |t| yen_criterion(&cum, t), false),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    /// Foreground is `v > level`.
    #[default]
    Above,
    /// Foreground is `v ≤ level`.
    Below,
}

pub fn apply_threshold(img: &GrayImage, level: u8, polarity: Polarity) -> BinaryMask {
    let level = level as u16;
    let bits = img
        .pixels()
        .iter()
        .map(|&v| match polarity {
            Polarity::Above => v > level,
            Polarity::Below => v <= level,
        })
        .collect();
    BinaryMask::new(img.width(), img.height(), bits).expect("same dims as image")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spikes(levels: &[(usize, u64)]) -> Histogram256 {
        let mut c = [0u64; 256];
        for &(v, k) in levels {
            c[v] = k;
        }
        Histogram256::from_counts(c)
    }

    #[test]
    fn histogram_of_constant_image() {
        let img = GrayImage::from_u8(4, 4, &[50; 16]).unwrap();
        let h = histogram(&img).unwrap();
        assert_eq!(h.counts()[50], 16);
        assert_eq!(h.total(), 16);
        assert_eq!(
            compute_threshold(&h, ThresholdMethod::Yen),
            Err(ThresholdError::DegenerateHistogram)
        );
        assert_eq!(
            compute_threshold(&h, ThresholdMethod::MinimumError),
            Err(ThresholdError::DegenerateHistogram)
        );
    }

    #[test]
    fn gradient_histogram_conserves_pixels() {
        let px: Vec<u8> = (0..=255).collect();
        let h = histogram(&GrayImage::from_u8(256, 1, &px).unwrap()).unwrap();
        assert!(h.counts().iter().all(|&c| c == 1));
        assert_eq!(h.total(), 256);
    }

    #[test]
    fn sixteen_bit_rejected() {
        let img = GrayImage::zeros(2, 2, BitDepth::Sixteen);
        assert_eq!(histogram(&img), Err(ThresholdError::NotEightBit));
    }

    #[test]
    fn two_spikes_split_between_modes() {
        let h = spikes(&[(50, 100), (200, 100)]);
        for m in [ThresholdMethod::MinimumError, ThresholdMethod::Yen] {
            let t = compute_threshold(&h, m).unwrap();
            assert!(t > 50 && t < 200, "{m:?} gave {t}");
        }
    }

    #[test]
    fn apply_threshold_extremes() {
        let img = GrayImage::from_u8(3, 1, &[1, 128, 255]).unwrap();
        assert_eq!(apply_threshold(&img, 255, Polarity::Above).count_foreground(), 0);
        assert_eq!(apply_threshold(&img, 0, Polarity::Above).count_foreground(), 3);
        assert_eq!(apply_threshold(&img, 128, Polarity::Below).bits(), &[true, true, false]);
    }

    #[test]
    fn reduction_by_gcd() {
        let h = spikes(&[(3, 6), (9, 4)]);
        let r = h.reduced();
        assert_eq!((r[3], r[9]), (3, 2));
    }
}
