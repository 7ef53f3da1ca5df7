//! Rotation-invariant 3D point-cloud anomaly detection.
//!
//! The pipeline canonicalizes a cloud with Point Coordinate Mapping (PCM),
//! splits it into groups by farthest point sampling and k-nearest neighbors,
//! extracts a fixed-dimension descriptor per group, and scores test samples
//! by nearest-neighbor distance against a memory bank built from normal
//! samples. Threshold-free evaluation (AUROC / AUPRO) and the file formats
//! used by the `ri3d` CLI live here too.

pub mod augment;
pub mod bank;
pub mod error;
pub mod features;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod sampling;

pub use error::{Error, Result};
