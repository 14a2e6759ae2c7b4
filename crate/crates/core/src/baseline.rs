//! Global-threshold baseline classifier.
//!
//! A cell is problematic when more than half of its samples have throughput
//! below the dataset mean and CQI above the dataset mean. Both comparisons
//! are strict, so samples sitting exactly on a threshold never count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{CellDataset, CellId, Label, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalThresholds {
    /// Mean throughput over every sample.
    pub t_avg: f64,
    /// Mean CQI over every sample.
    pub c_avg: f64,
}

/// Flat means over all samples.
pub fn global_averages(ds: &CellDataset) -> Result<GlobalThresholds> {
    if ds.is_empty() {
        return Err(Error::Empty("baseline dataset".into()));
    }
    let n = ds.len() as f64;
    let (t, c) = ds
        .samples
        .iter()
        .fold((0.0, 0.0), |(t, c), s| (t + s.throughput_kbps, c + s.cqi));
    Ok(GlobalThresholds {
        t_avg: t / n,
        c_avg: c / n,
    })
}

pub fn exceeds_thresholds(s: &Sample, th: &GlobalThresholds) -> bool {
    s.throughput_kbps < th.t_avg && s.cqi > th.c_avg
}

/// Fraction of the cell's samples that exceed both thresholds.
pub fn exceeding_fraction(samples: &[Sample], th: &GlobalThresholds) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("baseline cell".into()));
    }
    let hits = samples.iter().filter(|s| exceeds_thresholds(s, th)).count();
    Ok(hits as f64 / samples.len() as f64)
}

pub fn classify_cell_baseline(samples: &[Sample], th: &GlobalThresholds) -> Result<Label> {
    Ok(if exceeding_fraction(samples, th)? > 0.5 {
        Label::Problematic
    } else {
        Label::Normal
    })
}

/// Baseline verdict for every cell, thresholds taken from the same dataset.
pub fn classify_dataset(ds: &CellDataset) -> Result<(GlobalThresholds, BTreeMap<CellId, Label>)> {
    let th = global_averages(ds)?;
    let verdicts = ds
        .by_cell()
        .into_iter()
        .map(|(id, samples)| Ok((id, classify_cell_baseline(&samples, &th)?)))
        .collect::<Result<_>>()?;
    Ok((th, verdicts))
}
