//! Cell-level throughput problem classification for LTE networks.
//!
//! The pipeline groups UE-to-cell monitoring samples by cell, selects cells that
//! look problematic a priori (high CQI, low throughput), trains a frozen block of
//! K-Means and Gaussian-mixture models on those cells, and feeds the one-hot
//! cluster assignments of every cell into a small neural network that makes the
//! final normal/problematic decision. A threshold baseline, evaluation metrics
//! and a seeded synthetic data generator complete the toolkit.

pub mod baseline;
pub mod clusterblock;
pub mod dnn;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod prior;
pub mod seed;
pub mod synthgen;
pub mod telemetry;

pub use error::{Error, Result};
pub use telemetry::{CellDataset, CellId, Feature, Label, Sample, UeId};
