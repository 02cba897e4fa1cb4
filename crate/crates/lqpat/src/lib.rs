//! Local Quadruple Pattern (LQPAT) descriptor toolkit.
//!
//! The crate covers the full pipeline for evaluating hand-crafted local
//! pattern descriptors on labeled image collections:
//!
//! * [`image_core`] — grayscale rasters, color conversion, window access;
//! * [`descriptors`] — LQPAT plus the LBP and CSLBP baselines;
//! * [`similarity`] — chi-square distance and nearest-neighbor ranking;
//! * [`evaluation`] — ARP/ARR/ANMRR retrieval metrics, recognition rate,
//!   CMC, seeded cross-validation and the entropy diagnostic;
//! * [`dataset`] — directory-tree ingestion and the CSV feature store.

pub mod dataset;
pub mod descriptors;
pub mod error;
pub mod evaluation;
pub mod image_core;
pub mod similarity;

pub use dataset::{LabeledDataset, Record};
pub use descriptors::{
    DescriptorKind, DescriptorSpec, FeatureImageSet, FeatureVector, QuadrupleCodes,
};
pub use error::{Error, Result};
pub use image_core::GrayImage;
