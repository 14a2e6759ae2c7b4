//! Seeded synthetic telemetry with planted throughput-problematic cells.
//!
//! Normal cells: throughput follows CQI, scaled by the cell's capacity and by
//! congestion from its active-UE load. Problematic cells: CQI is drawn high,
//! load is ordinary, but throughput is multiplied by a suppression factor in
//! `[0.05, 0.25]`. Congested cells are normal cells with high CQI whose low
//! throughput is explained by heavy load. Radio fields (RSRP, RSRQ) track CQI;
//! each cell has its own carrier, time-of-day and speed mix, and coverage
//! radius.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::telemetry::{CellDataset, CellId, Label, Sample, TA_STEP_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub fn new(min: usize, max: usize) -> Self {
        IntRange { min, max }
    }

    fn draw(&self, rng: &mut seed::Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_cells: usize,
    pub n_problematic: usize,
    /// Normal cells with high CQI and heavy load.
    pub n_congested: usize,
    pub ues_per_cell: IntRange,
    pub samples_per_ue: IntRange,
    pub seed: u64,
    /// Relative noise of the throughput and CQI draws.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        // About 25k samples over 53 cells with 6 planted problems.
        SynthConfig {
            n_cells: 53,
            n_problematic: 6,
            n_congested: 4,
            ues_per_cell: IntRange::new(30, 70),
            samples_per_ue: IntRange::new(5, 13),
            seed: 1,
            noise: 0.25,
        }
    }
}

impl SynthConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_cells < 2 {
            return bad(format!("n_cells = {} must be >= 2", self.n_cells));
        }
        if self.n_problematic + self.n_congested > self.n_cells {
            return bad(format!(
                "n_problematic + n_congested = {} exceeds n_cells = {}",
                self.n_problematic + self.n_congested,
                self.n_cells
            ));
        }
        for (name, r) in [
            ("ues_per_cell", self.ues_per_cell),
            ("samples_per_ue", self.samples_per_ue),
        ] {
            if r.min == 0 || r.min > r.max {
                return bad(format!(
                    "{name} range [{}, {}] is empty or zero",
                    r.min, r.max
                ));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise = {} must be >= 0", self.noise));
        }
        Ok(())
    }
}

// Cell-level parameter ranges.
const NORMAL_CQI_MEAN: (f64, f64) = (3.5, 12.0);
const PROBLEM_CQI_MEAN: (f64, f64) = (11.0, 13.5);
const CONGESTED_CQI_MEAN: (f64, f64) = (10.0, 12.5);
const SUPPRESSION: (f64, f64) = (0.05, 0.25);
const NORMAL_LOAD_MEAN: (f64, f64) = (2.0, 30.0);
const PROBLEM_LOAD_MEAN: (f64, f64) = (2.0, 12.0);
const CONGESTED_LOAD_MEAN: (f64, f64) = (40.0, 80.0);
const CAPACITY_MEDIAN_KBPS: f64 = 30_000.0;
const CAPACITY_SIGMA: f64 = 0.35;
const CONGESTION_SCALE: f64 = 12.0;
const MAX_TA_STEPS: u32 = 40;
const MAX_BAND: u32 = 8;
/// CQI swing between a UE next to the site and one at the cell edge.
const DISTANCE_CQI_SWING: f64 = 6.0;
/// Concentration of the per-cell time-interval and speed-range mixes; small
/// values give cells distinct usage profiles.
const PROFILE_CONCENTRATION: f64 = 0.5;
/// Smallest cell radius, in timing-advance steps.
const MIN_RADIUS_STEPS: u32 = 5;
/// Load multiplier per six-hour time interval (night, morning, afternoon, evening).
const DIURNAL_LOAD: [f64; 4] = [0.4, 1.0, 1.5, 1.1];

struct CellProfile {
    cqi_mean: f64,
    load_mean: f64,
    capacity: f64,
    suppression: f64,
}

/// Symmetric Dirichlet draw: categorical weights over `n` values.
fn mix(rng: &mut seed::Rng, n: usize) -> WeightedIndex<f64> {
    let gamma = Gamma::new(PROFILE_CONCENTRATION, 1.0).expect("valid");
    let w: Vec<f64> = (0..n).map(|_| gamma.sample(rng).max(1e-12)).collect();
    WeightedIndex::new(w).expect("positive weights")
}

fn uniform(rng: &mut seed::Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

fn truncated_normal(rng: &mut seed::Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if sd <= 0.0 {
        return mean.clamp(lo, hi);
    }
    let dist = Normal::new(mean, sd).expect("sd > 0");
    for _ in 0..64 {
        let v = dist.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    mean.clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellKind {
    Normal,
    Congested,
    Problematic,
}

fn generate_cell(
    cfg: &SynthConfig,
    cell_index: usize,
    cell_id: CellId,
    kind: CellKind,
    out: &mut Vec<Sample>,
) {
    let mut rng = seed::rng(seed::child(cfg.seed, &[cell_index as u64]));
    let problematic = kind == CellKind::Problematic;
    let profile = CellProfile {
        cqi_mean: uniform(
            &mut rng,
            match kind {
                CellKind::Normal => NORMAL_CQI_MEAN,
                CellKind::Congested => CONGESTED_CQI_MEAN,
                CellKind::Problematic => PROBLEM_CQI_MEAN,
            },
        ),
        // The planted fault is not explained by congestion.
        load_mean: uniform(
            &mut rng,
            match kind {
                CellKind::Normal => NORMAL_LOAD_MEAN,
                CellKind::Congested => CONGESTED_LOAD_MEAN,
                CellKind::Problematic => PROBLEM_LOAD_MEAN,
            },
        ),
        capacity: LogNormal::new(CAPACITY_MEDIAN_KBPS.ln(), CAPACITY_SIGMA)
            .expect("valid")
            .sample(&mut rng),
        suppression: if problematic {
            uniform(&mut rng, SUPPRESSION)
        } else {
            1.0
        },
    };
    let cqi_sd = 7.5 * cfg.noise;
    let tput_noise = LogNormal::new(0.0, cfg.noise.max(1e-12)).expect("valid");
    let erab = Exp::new(1.0 / 60.0).expect("valid");
    let unit = Normal::new(0.0, 1.0).expect("valid");

    // One carrier per cell; usage mix and radius vary by cell.
    let band = f64::from(rng.random_range(1..=MAX_BAND));
    let intervals = mix(&mut rng, 4);
    let speeds = mix(&mut rng, 3);
    let radius = rng.random_range(MIN_RADIUS_STEPS..=MAX_TA_STEPS);
    let n_ues = cfg.ues_per_cell.draw(&mut rng);
    for ue in 0..n_ues {
        let ue_id = cell_index as u64 * 100_000 + ue as u64;
        let ta_steps = rng.random_range(0..=radius);
        let speed = (speeds.sample(&mut rng) + 1) as f64;
        // Radio quality falls off towards the cell edge.
        let distance = f64::from(ta_steps) / f64::from(radius);
        let ue_cqi = truncated_normal(
            &mut rng,
            profile.cqi_mean + DISTANCE_CQI_SWING * (0.5 - distance),
            cqi_sd * 0.5,
            0.0,
            15.0,
        );
        let n_samples = cfg.samples_per_ue.draw(&mut rng);
        for _ in 0..n_samples {
            let interval = intervals.sample(&mut rng) as u32 + 1;
            let cqi = truncated_normal(&mut rng, ue_cqi, cqi_sd * 0.75, 0.0, 15.0);
            let load = (profile.load_mean
                * DIURNAL_LOAD[interval as usize - 1]
                * (1.0 + 0.15 * unit.sample(&mut rng)))
            .max(1.0);
            let congestion = 1.0 / (1.0 + load / CONGESTION_SCALE);
            let noise = if cfg.noise > 0.0 {
                tput_noise.sample(&mut rng)
            } else {
                1.0
            };
            let throughput =
                profile.capacity * (cqi / 15.0) * congestion * profile.suppression * noise;
            let tti_prb_use = (100.0 * (1.0 - (-load / 10.0).exp()) + 3.0 * unit.sample(&mut rng))
                .clamp(0.0, 100.0);
            let prb = (tti_prb_use / load * (1.0 + 0.1 * unit.sample(&mut rng))).clamp(0.0, 100.0);
            let rsrp =
                (-140.0 + cqi / 15.0 * 90.0 + 4.0 * unit.sample(&mut rng)).clamp(-140.0, -44.0);
            let rsrq = (-19.5 + cqi / 15.0 * 15.0 + 1.0 * unit.sample(&mut rng)).clamp(-19.5, -3.0);
            out.push(Sample {
                cell_id,
                ue_id,
                cell_data_rate_kbps: throughput * load * rng.random_range(0.8..=1.2),
                cqi,
                erab_duration_s: erab.sample(&mut rng),
                frequency_band: band,
                load_active: load,
                prb,
                rsrp_dbm: rsrp,
                rsrq_db: rsrq,
                speed_range: speed,
                throughput_kbps: throughput,
                time_interval: f64::from(interval),
                timing_advance_m: f64::from(ta_steps) * TA_STEP_M,
                tti_prb_use,
            });
        }
    }
}

/// Cell ids are `1..=n_cells`; every cell is labeled.
pub fn generate(cfg: &SynthConfig) -> Result<CellDataset> {
    cfg.validate()?;
    let picked = index::sample(
        &mut seed::rng(seed::stage(cfg.seed, "planted")),
        cfg.n_cells,
        cfg.n_problematic + cfg.n_congested,
    )
    .into_vec();
    let planted: BTreeSet<usize> = picked[..cfg.n_problematic].iter().copied().collect();
    let congested: BTreeSet<usize> = picked[cfg.n_problematic..].iter().copied().collect();
    let mut samples = Vec::new();
    let mut labels = BTreeMap::new();
    for i in 0..cfg.n_cells {
        let cell_id = i as CellId + 1;
        let problematic = planted.contains(&i);
        let kind = if problematic {
            CellKind::Problematic
        } else if congested.contains(&i) {
            CellKind::Congested
        } else {
            CellKind::Normal
        };
        generate_cell(cfg, i, cell_id, kind, &mut samples);
        labels.insert(
            cell_id,
            if problematic {
                Label::Problematic
            } else {
                Label::Normal
            },
        );
    }
    CellDataset::new(samples, labels)
}
