//! Segmentation scoring against paired ground truths and a deterministic
//! single-cell analysis pipeline for rod-shaped bacteria.
//!
//! The crate is organised in the order data flows through it:
//!
//! 1. [`imaging`] – image/mask I/O, 16→8-bit conversion, padding, renders.
//! 2. [`components`] – 4-connected component labelling.
//! 3. [`eval`] – IoU matching, detection metrics, l_ex-error, experimental
//!    distance and prediction validity, pixel losses.
//! 4. [`thresholding`] – minimum-error and Yen baseline segmenters.
//! 5. [`cell_analyzer`] – size, proximity and cluster-intersection filters.
//! 6. [`cell_geometry`] – principal-axis frame, quadratic midline, rod
//!    measurements.
//! 7. [`fluor_analysis`] – per-cell intensity statistics and cluster records.
//! 8. [`database`] – per-cell rows and the CSV writer.
//! 9. [`pipeline`] – one frame from masks and intensity images to rows.

pub mod cell_analyzer;
pub mod cell_geometry;
pub mod components;
pub mod database;
pub mod eval;
pub mod fluor_analysis;
pub mod imaging;
pub mod pipeline;
pub mod thresholding;

pub use components::{label_components, mask_from_components, Component, ComponentSet};
pub use imaging::{BinaryMask, BitDepth, GrayImage, RgbImage};
