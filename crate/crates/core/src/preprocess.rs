//! Cleaning, unit conversion, min-max scaling, augmentation and splitting.
//!
//! Order matters: low-sample cells are filtered first, then RSRP and RSRQ are
//! converted to linear units, then every feature is min-max scaled with the
//! parameters of the training set. [`prepare`] runs the whole chain.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::telemetry::{CellDataset, Feature, Sample};

pub const DEFAULT_MIN_SAMPLES: usize = 100;

/// Drops every cell with fewer than `min_samples` samples.
pub fn filter_low_sample_cells(train: &CellDataset, min_samples: usize) -> Result<CellDataset> {
    let counts = train.cell_counts();
    let samples: Vec<Sample> = train
        .samples
        .iter()
        .filter(|s| counts[&s.cell_id] >= min_samples)
        .copied()
        .collect();
    if samples.is_empty() {
        return Err(Error::Empty(format!(
            "no cell has at least {min_samples} training samples"
        )));
    }
    let labels = train
        .labels
        .iter()
        .filter(|(id, _)| counts[id] >= min_samples)
        .map(|(id, l)| (*id, *l))
        .collect();
    Ok(CellDataset { samples, labels })
}

fn ensure_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// dBm to linear power: `10^(v/10) / 1000`.
///
/// The typeset formula can also be read as `10^((v/10)/1000)`, which maps the
/// whole RSRP range to roughly 1.0 and erases the feature; the conventional
/// dBm-to-milliwatt conversion, rescaled by 1/1000, is used instead.
pub fn rsrp_db_to_linear(v: f64) -> Result<f64> {
    ensure_finite(v, "rsrp")?;
    Ok(10f64.powf(v / 10.0) / 1000.0)
}

/// dB to linear amplitude ratio: `10^(v/20)`.
pub fn rsrq_db_to_linear(v: f64) -> Result<f64> {
    ensure_finite(v, "rsrq")?;
    Ok(10f64.powf(v / 20.0))
}

/// Converts RSRP and RSRQ of every sample to linear units in place.
///
/// After this the `rsrp_dbm` and `rsrq_db` fields hold linear values.
pub fn convert_units(ds: &CellDataset) -> Result<CellDataset> {
    let samples = ds
        .samples
        .iter()
        .map(|s| {
            Ok(Sample {
                rsrp_dbm: rsrp_db_to_linear(s.rsrp_dbm)?,
                rsrq_db: rsrq_db_to_linear(s.rsrq_db)?,
                ..*s
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellDataset {
        samples,
        labels: ds.labels.clone(),
    })
}

/// Per-feature minimum and maximum seen on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: [f64; Feature::COUNT],
    pub max: [f64; Feature::COUNT],
}

impl ScalerParams {
    pub fn scale(&self, feature: Feature, v: f64) -> f64 {
        let i = feature.index();
        let span = self.max[i] - self.min[i];
        if span <= 0.0 {
            0.0
        } else {
            ((v - self.min[i]) / span).clamp(0.0, 1.0)
        }
    }
}

pub fn fit_scaler(train: &CellDataset) -> Result<ScalerParams> {
    if train.is_empty() {
        return Err(Error::Empty("scaler training set".into()));
    }
    let mut p = ScalerParams {
        min: [f64::INFINITY; Feature::COUNT],
        max: [f64::NEG_INFINITY; Feature::COUNT],
    };
    for s in &train.samples {
        for (i, v) in s.features().into_iter().enumerate() {
            p.min[i] = p.min[i].min(v);
            p.max[i] = p.max[i].max(v);
        }
    }
    Ok(p)
}

/// Maps features to `[0, 1]`; constant features map to 0 and unseen extremes clamp.
pub fn apply_scaler(ds: &CellDataset, p: &ScalerParams) -> CellDataset {
    let samples = ds
        .samples
        .iter()
        .map(|s| {
            let mut out = *s;
            for f in Feature::ALL {
                *out.get_mut(f) = p.scale(f, s.get(f));
            }
            out
        })
        .collect();
    CellDataset {
        samples,
        labels: ds.labels.clone(),
    }
}

/// Splits every cell's samples so the training side gets `round(fraction * n)`.
///
/// Both sides keep all cells and the full label map; within each side samples
/// stay in dataset order.
pub fn split_train_test(
    ds: &CellDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(CellDataset, CellDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let mut positions: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.samples.iter().enumerate() {
        positions.entry(s.cell_id).or_default().push(i);
    }
    let mut in_train = vec![false; ds.samples.len()];
    for (&cell_id, idx) in &positions {
        let n = idx.len();
        if n < 2 {
            return Err(Error::TooFewSamples {
                cell_id,
                count: n,
                needed: 2,
            });
        }
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut seed::rng(seed::child(seed, &[cell_id])));
        for &i in &shuffled[..n_train] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<(usize, &Sample)>, Vec<(usize, &Sample)>) = ds
        .samples
        .iter()
        .enumerate()
        .partition(|(i, _)| in_train[*i]);
    let side = |v: Vec<(usize, &Sample)>| CellDataset {
        samples: v.into_iter().map(|(_, s)| *s).collect(),
        labels: ds.labels.clone(),
    };
    Ok((side(train), side(test)))
}

/// Brings a cell to exactly `target` samples.
///
/// Short cells are extended by cyclic duplication (sample `i mod n`); long
/// cells drop a seeded uniform subset, keeping the survivors in order.
pub fn fix_sample_count(samples: &[Sample], target: usize, seed: u64) -> Result<Vec<Sample>> {
    if samples.is_empty() {
        return Err(Error::Empty("cell has no samples to augment".into()));
    }
    if target == 0 {
        return Err(Error::InvalidConfig(
            "target sample count must be >= 1".into(),
        ));
    }
    let n = samples.len();
    Ok(if n < target {
        (0..target).map(|i| samples[i % n]).collect()
    } else if n > target {
        let mut keep = index::sample(&mut seed::rng(seed), n, target).into_vec();
        keep.sort_unstable();
        keep.into_iter().map(|i| samples[i]).collect()
    } else {
        samples.to_vec()
    })
}

/// Output of [`prepare`]: scaled train/test sides and the fitted scaler.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: CellDataset,
    pub test: CellDataset,
    pub scaler: ScalerParams,
}

/// Filter, convert, fit on train, scale both sides.
pub fn prepare(train: &CellDataset, test: &CellDataset, min_samples: usize) -> Result<Prepared> {
    let train = filter_low_sample_cells(train, min_samples)?;
    let train = convert_units(&train)?;
    let test = convert_units(test)?;
    let scaler = fit_scaler(&train)?;
    Ok(Prepared {
        train: apply_scaler(&train, &scaler),
        test: apply_scaler(&test, &scaler),
        scaler,
    })
}

/// Converts and scales data for a trained scaler (classification path).
pub fn transform(ds: &CellDataset, scaler: &ScalerParams) -> Result<CellDataset> {
    Ok(apply_scaler(&convert_units(ds)?, scaler))
}
