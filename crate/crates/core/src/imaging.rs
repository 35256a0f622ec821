//! Image and mask containers, file I/O, preprocessing and visual renders.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::components::ComponentSet;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("unreadable image {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("{path}: expected a single-channel image, found {found}")]
    MultiChannel { path: PathBuf, found: String },
    #[error("unsupported bit depth {0} (expected 8 or 16)")]
    UnsupportedBitDepth(u32),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("component {id} lies outside a {width}x{height} image")]
    ComponentOutOfBounds { id: u32, width: usize, height: usize },
    #[error("failed to write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, ImagingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }
}

/// Single-channel intensity image, row-major. 8-bit images keep their values
/// in the low byte of the `u16` storage.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    bit_depth: BitDepth,
    pixels: Vec<u16>,
    pixel_size_um: f64,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, bit_depth: BitDepth, pixels: Vec<u16>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(ImagingError::Invalid(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        let max = bit_depth.max_value();
        if let Some(v) = pixels.iter().find(|&&v| v > max) {
            return Err(ImagingError::Invalid(format!(
                "intensity {v} does not fit in {} bits",
                bit_depth.bits()
            )));
        }
        Ok(Self {
            width,
            height,
            bit_depth,
            pixels,
            pixel_size_um: 1.0,
        })
    }

    pub fn from_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            BitDepth::Eight,
            pixels.iter().map(|&v| v as u16).collect(),
        )
    }

    pub fn zeros(width: usize, height: usize, bit_depth: BitDepth) -> Self {
        Self {
            width,
            height,
            bit_depth,
            pixels: vec![0; width * height],
            pixel_size_um: 1.0,
        }
    }

    pub fn with_pixel_size(mut self, pixel_size_um: f64) -> Result<Self> {
        if !(pixel_size_um > 0.0 && pixel_size_um.is_finite()) {
            return Err(ImagingError::Invalid(format!(
                "pixel size must be positive, got {pixel_size_um}"
            )));
        }
        self.pixel_size_um = pixel_size_um;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn pixel_size_um(&self) -> f64 {
        self.pixel_size_um
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    /// Panics if `value` exceeds the bit depth or the position is out of range.
    pub fn set(&mut self, row: usize, col: usize, value: u16) {
        assert!(value <= self.bit_depth.max_value(), "intensity out of range");
        self.pixels[row * self.width + col] = value;
    }

    /// The pixel values as bytes. Only meaningful for 8-bit images.
    pub fn to_u8_vec(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| v.min(255) as u8).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    r: Vec<u8>,
    g: Vec<u8>,
    b: Vec<u8>,
}

impl RgbImage {
    pub fn black(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            r: vec![0; n],
            g: vec![0; n],
            b: vec![0; n],
        }
    }

    pub fn from_channels(width: usize, height: usize, r: Vec<u8>, g: Vec<u8>, b: Vec<u8>) -> Result<Self> {
        let n = width * height;
        if r.len() != n || g.len() != n || b.len() != n {
            return Err(ImagingError::Invalid("channel length does not match dimensions".into()));
        }
        Ok(Self { width, height, r, g, b })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn red(&self) -> &[u8] {
        &self.r
    }

    pub fn green(&self) -> &[u8] {
        &self.g
    }

    pub fn blue(&self) -> &[u8] {
        &self.b
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = row * self.width + col;
        [self.r[i], self.g[i], self.b[i]]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = row * self.width + col;
        self.r[i] = rgb[0];
        self.g[i] = rgb[1];
        self.b[i] = rgb[2];
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.r.len() * 3);
        for i in 0..self.r.len() {
            buf.extend_from_slice(&[self.r[i], self.g[i], self.b[i]]);
        }
        let img: ImageBuffer<Rgb<u8>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, buf).expect("buffer sized from dims");
        img.save(path).map_err(|e| write_error(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(ImagingError::Invalid(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count_foreground(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(ImagingError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Writes the mask as an 8-bit PNG with 0 for background and 255 for foreground.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let img: ImageBuffer<Luma<u8>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, buf).expect("buffer sized from dims");
        img.save(path).map_err(|e| write_error(path, e))
    }
}

impl GrayImage {
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (w, h) = (self.width as u32, self.height as u32);
        let res = match self.bit_depth {
            BitDepth::Eight => {
                let img: ImageBuffer<Luma<u8>, _> =
                    ImageBuffer::from_raw(w, h, self.to_u8_vec()).expect("buffer sized from dims");
                img.save(path)
            }
            BitDepth::Sixteen => {
                let img: ImageBuffer<Luma<u16>, _> =
                    ImageBuffer::from_raw(w, h, self.pixels.clone()).expect("buffer sized from dims");
                img.save(path)
            }
        };
        res.map_err(|e| write_error(path, e))
    }
}

fn write_error(path: &Path, e: image::ImageError) -> ImagingError {
    ImagingError::Write {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    Gray,
    Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedImage {
    Gray(GrayImage),
    Mask(BinaryMask),
}

/// Loads a PGM, PNG or TIFF file. Format is detected from content.
pub fn load_image(path: &Path, kind: ImageKind) -> Result<LoadedImage> {
    let gray = load_gray(path)?;
    Ok(match kind {
        ImageKind::Gray => LoadedImage::Gray(gray),
        ImageKind::Mask => LoadedImage::Mask(gray_to_mask(&gray)),
    })
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let unreadable = |reason: String| ImagingError::Unreadable {
        path: path.to_path_buf(),
        reason,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => unreadable(format!("unsupported: {u}")),
        other => unreadable(other.to_string()),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(buf) => GrayImage::new(
            w,
            h,
            BitDepth::Eight,
            buf.into_raw().into_iter().map(u16::from).collect(),
        ),
        DynamicImage::ImageLuma16(buf) => GrayImage::new(w, h, BitDepth::Sixteen, buf.into_raw()),
        other => {
            let color = other.color();
            if color.channel_count() == 1 {
                Err(ImagingError::UnsupportedBitDepth(color.bits_per_pixel() as u32))
            } else {
                Err(ImagingError::MultiChannel {
                    path: path.to_path_buf(),
                    found: format!("{color:?}"),
                })
            }
        }
    }
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    load_gray(path).map(|g| gray_to_mask(&g))
}

/// Any nonzero intensity is foreground.
pub fn gray_to_mask(img: &GrayImage) -> BinaryMask {
    BinaryMask {
        width: img.width,
        height: img.height,
        bits: img.pixels.iter().map(|&v| v != 0).collect(),
    }
}

/// Per-image min–max stretch of a 16-bit image to 8 bits, rounding half up.
/// A constant image maps to all zeros. 8-bit input is returned unchanged.
pub fn to_8bit(img: &GrayImage) -> GrayImage {
    if img.bit_depth == BitDepth::Eight {
        return img.clone();
    }
    let min = img.pixels.iter().copied().min().unwrap_or(0) as u64;
    let max = img.pixels.iter().copied().max().unwrap_or(0) as u64;
    let range = max - min;
    let pixels = img
        .pixels
        .iter()
        .map(|&v| {
            if range == 0 {
                0
            } else {
                // round((v - min) * 255 / range), half up, in exact integer arithmetic
                let num = (v as u64 - min) * 255;
                ((2 * num + range) / (2 * range)) as u16
            }
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        bit_depth: BitDepth::Eight,
        pixels,
        pixel_size_um: img.pixel_size_um,
    }
}

/// Rasters that can be zero-extended at the bottom/right and cropped back.
pub trait Raster: Sized {
    fn dims(&self) -> (usize, usize);
    fn extend_to(&self, width: usize, height: usize) -> Self;
    fn crop_to(&self, width: usize, height: usize) -> Self;
}

fn resize_grid<T: Copy>(src: &[T], sw: usize, sh: usize, w: usize, h: usize, fill: T) -> Vec<T> {
    let mut out = vec![fill; w * h];
    for r in 0..sh.min(h) {
        let n = sw.min(w);
        out[r * w..r * w + n].copy_from_slice(&src[r * sw..r * sw + n]);
    }
    out
}

impl Raster for GrayImage {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn extend_to(&self, width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            pixels: resize_grid(&self.pixels, self.width, self.height, width, height, 0),
            ..self.clone()
        }
    }

    fn crop_to(&self, width: usize, height: usize) -> Self {
        self.extend_to(width, height)
    }
}

impl Raster for BinaryMask {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn extend_to(&self, width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: resize_grid(&self.bits, self.width, self.height, width, height, false),
        }
    }

    fn crop_to(&self, width: usize, height: usize) -> Self {
        self.extend_to(width, height)
    }
}

/// A padded raster plus the dimensions it had before padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Padded<T> {
    pub image: T,
    pub original_width: usize,
    pub original_height: usize,
}

impl<T: Raster> Padded<T> {
    pub fn crop(&self) -> T {
        self.image.crop_to(self.original_width, self.original_height)
    }
}

/// Pads bottom and right with zeros so both dimensions are multiples of `m`.
pub fn pad_to_multiple<T: Raster + Clone>(img: &T, m: usize) -> Result<Padded<T>> {
    if m == 0 {
        return Err(ImagingError::Invalid("padding multiple must be at least 1".into()));
    }
    let (w, h) = img.dims();
    let (pw, ph) = (w.div_ceil(m) * m, h.div_ceil(m) * m);
    let image = if (pw, ph) == (w, h) {
        img.clone()
    } else {
        img.extend_to(pw, ph)
    };
    Ok(Padded {
        image,
        original_width: w,
        original_height: h,
    })
}

/// Builds the three-channel network input: R carries the cell image, G and B
/// the fluorescence channel.
pub fn compose_fluor_input(cells: &GrayImage, fluor: &GrayImage) -> Result<RgbImage> {
    if cells.dims() != fluor.dims() {
        return Err(ImagingError::DimensionMismatch(
            cells.width,
            cells.height,
            fluor.width,
            fluor.height,
        ));
    }
    let c8 = to_8bit(cells).to_u8_vec();
    let f8 = to_8bit(fluor).to_u8_vec();
    RgbImage::from_channels(cells.width, cells.height, c8, f8.clone(), f8)
}

/// Colors each component from a seeded palette. Colors are distinct across
/// components and never black.
pub fn render_labels(components: &ComponentSet, seed: u64) -> Result<RgbImage> {
    let (height, width) = components.dims();
    let mut out = RgbImage::black(width, height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used: HashSet<[u8; 3]> = HashSet::new();
    for c in components.iter() {
        let color = loop {
            let candidate = [
                rng.gen_range(40..=255u8),
                rng.gen_range(40..=255u8),
                rng.gen_range(40..=255u8),
            ];
            if used.insert(candidate) {
                break candidate;
            }
        };
        for &(r, col) in c.pixels() {
            if r >= height || col >= width {
                return Err(ImagingError::ComponentOutOfBounds {
                    id: c.id(),
                    width,
                    height,
                });
            }
            out.set(r, col, color);
        }
    }
    Ok(out)
}

pub const DIFF_ONLY_A: [u8; 3] = [255, 0, 255];
pub const DIFF_ONLY_B: [u8; 3] = [0, 255, 0];
pub const DIFF_BOTH: [u8; 3] = [255, 255, 255];
pub const DIFF_NEITHER: [u8; 3] = [0, 0, 0];

/// Pixels only in `a` are magenta, only in `b` green, in both white.
pub fn render_diff(a: &BinaryMask, b: &BinaryMask) -> Result<RgbImage> {
    a.same_dims(b)?;
    let mut out = RgbImage::black(a.width, a.height);
    for (i, (&x, &y)) in a.bits.iter().zip(&b.bits).enumerate() {
        let color = match (x, y) {
            (true, false) => DIFF_ONLY_A,
            (false, true) => DIFF_ONLY_B,
            (true, true) => DIFF_BOTH,
            (false, false) => DIFF_NEITHER,
        };
        out.r[i] = color[0];
        out.g[i] = color[1];
        out.b[i] = color[2];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::label_components;

    fn gray16(vals: &[u16]) -> GrayImage {
        GrayImage::new(vals.len(), 1, BitDepth::Sixteen, vals.to_vec()).unwrap()
    }

    #[test]
    fn to_8bit_endpoints_and_rounding() {
        assert_eq!(to_8bit(&gray16(&[0, 65535])).pixels(), &[0, 255]);
        assert_eq!(to_8bit(&gray16(&[100, 200, 300])).pixels(), &[0, 128, 255]);
        assert_eq!(to_8bit(&gray16(&[500; 6])).pixels(), &[0; 6]);
        assert_eq!(to_8bit(&gray16(&[0, 1])).bit_depth(), BitDepth::Eight);
    }

    #[test]
    fn pad_examples() {
        let img = GrayImage::zeros(1022, 1024, BitDepth::Sixteen);
        let p = pad_to_multiple(&img, 32).unwrap();
        assert_eq!(p.image.dims(), (1024, 1024));
        let same = GrayImage::zeros(32, 32, BitDepth::Eight);
        assert_eq!(pad_to_multiple(&same, 32).unwrap().image, same);
        let odd = BinaryMask::blank(33, 1);
        assert_eq!(pad_to_multiple(&odd, 32).unwrap().image.dims(), (64, 32));
        assert!(pad_to_multiple(&odd, 0).is_err());
    }

    #[test]
    fn compose_channels() {
        let cells = GrayImage::from_u8(2, 1, &[10, 20]).unwrap();
        let fluor = GrayImage::from_u8(2, 1, &[0, 0]).unwrap();
        let rgb = compose_fluor_input(&cells, &fluor).unwrap();
        assert_eq!(rgb.red(), &[10, 20]);
        assert_eq!(rgb.green(), &[0, 0]);
        assert_eq!(rgb.blue(), &[0, 0]);

        let a = GrayImage::zeros(10, 10, BitDepth::Eight);
        let b = GrayImage::zeros(11, 10, BitDepth::Eight);
        assert!(matches!(
            compose_fluor_input(&a, &b),
            Err(ImagingError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn render_labels_empty_is_black() {
        let set = label_components(&BinaryMask::blank(4, 3));
        let img = render_labels(&set, 42).unwrap();
        assert_eq!(img, RgbImage::black(4, 3));
    }

    #[test]
    fn render_labels_corner_touching_distinct() {
        let mut m = BinaryMask::blank(2, 2);
        m.set(0, 0, true);
        m.set(1, 1, true);
        let set = label_components(&m);
        let img = render_labels(&set, 7).unwrap();
        assert_ne!(img.get(0, 0), img.get(1, 1));
        assert_eq!(img.get(0, 1), DIFF_NEITHER);
        assert_eq!(img, render_labels(&set, 7).unwrap());
    }

    #[test]
    fn render_diff_classes() {
        let full = BinaryMask::new(2, 2, vec![true; 4]).unwrap();
        let empty = BinaryMask::blank(2, 2);
        let d = render_diff(&full, &empty).unwrap();
        assert!(d.red().iter().all(|&v| v == DIFF_ONLY_A[0]));
        assert!(d.green().iter().all(|&v| v == DIFF_ONLY_A[1]));
        let same = render_diff(&full, &full).unwrap();
        assert!((0..2).all(|r| (0..2).all(|c| same.get(r, c) == DIFF_BOTH)));
        assert!(render_diff(&full, &BinaryMask::blank(3, 2)).is_err());
    }

    #[test]
    fn gray_validation() {
        assert!(GrayImage::new(2, 2, BitDepth::Eight, vec![0; 3]).is_err());
        assert!(GrayImage::new(1, 1, BitDepth::Eight, vec![256]).is_err());
        assert!(GrayImage::zeros(1, 1, BitDepth::Eight).with_pixel_size(0.0).is_err());
    }
}
