//! Post-network pipeline for center-point plant apex tracking.
//!
//! The detection network itself is out of scope; this crate picks up at its
//! output tensors and carries them through to evaluated tracks:
//!
//! - [`decoder`]: peak extraction from heatmap + size map
//! - [`tracker`]: greedy displacement-based association into tracklets
//! - [`dataset`]: VOC/COCO annotation handling and the ATRK tensor format
//! - [`eval`]: center-MSE metrics, threshold sweeps, trace rendering
//! - [`synth`]: deterministic synthetic trajectories and assignment oracle

pub mod dataset;
pub mod decoder;
pub mod detection;
mod error;
pub mod eval;
pub mod grid;
pub mod synth;
pub mod tensor;
pub mod track;
pub mod tracker;

pub use detection::Detection;
pub use error::{Error, Result};
pub use grid::{grid_to_image, image_to_grid, Cell, GridSpec};
pub use tensor::{DisplacementField, Heatmap, SizeMap};
pub use track::{TrackPoint, TrackTable, Tracklet};
