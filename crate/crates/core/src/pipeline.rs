//! End-to-end orchestration: configuration, training, evaluation,
//! classification and the report/bundle files they exchange.
//!
//! Every stochastic stage draws its seed from the single configured seed via
//! [`seed::stage`], so a stage can be re-run in isolation and two runs with
//! the same configuration write byte-identical reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::{self, GlobalThresholds};
use crate::clusterblock::{build_block_with, encode_cell, ClusterBlock, DEFAULT_KS};
use crate::dnn::{self, layer_widths, MlpConfig, MlpModel};
use crate::error::{Error, Result, StageContext};
use crate::metrics::{self, ConfusionCounts, PrcPoint};
use crate::preprocess::{self, ScalerParams};
use crate::prior::{self, CellAggregates};
use crate::seed;
use crate::telemetry::{self, CellDataset, CellId, Label, Validation};

pub const BLOCK_FILE: &str = "block.json";
pub const MODEL_FILE: &str = "model.bin";
pub const BUNDLE_FILE: &str = "bundle.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const EVAL_REPORT_FILE: &str = "evaluation.json";
pub const VERDICTS_FILE: &str = "verdicts.csv";
pub const PRC_FILE: &str = "prc.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = ".celltriage.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub data: PathBuf,
    pub labels: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data: "data.csv".into(),
            labels: Some("labels.csv".into()),
            out: "out".into(),
        }
    }
}

/// Pipeline settings. `mlp.input_dim` and `mlp.seed` are filled in at
/// training time from the clustering block and the pipeline seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub seed: u64,
    pub train_fraction: f64,
    pub min_samples: usize,
    pub prior_fraction: f64,
    pub cluster_ks: Vec<usize>,
    pub threshold: f64,
    /// Encodings per training cell. View 0 uses the encode seed; further
    /// views redraw the sample subset from the augment seed.
    pub train_views: usize,
    pub baseline: bool,
    pub validation: Validation,
    pub mlp: MlpConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            seed: 1,
            train_fraction: 0.7,
            min_samples: preprocess::DEFAULT_MIN_SAMPLES,
            prior_fraction: prior::DEFAULT_FRACTION,
            cluster_ks: DEFAULT_KS.to_vec(),
            threshold: 0.5,
            train_views: 1,
            baseline: true,
            validation: Validation::Strict,
            mlp: MlpConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, f) in [
            ("train_fraction", self.train_fraction),
            ("prior_fraction", self.prior_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("{name} = {f} not in (0, 1)"));
            }
        }
        if self.cluster_ks.is_empty() || self.cluster_ks.contains(&0) {
            return bad("cluster_ks must be non-empty and positive".into());
        }
        if self.train_views == 0 {
            return bad("train_views must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold = {} not in [0, 1]", self.threshold));
        }
        let mut seen = BTreeSet::new();
        let paths = [
            Some(&self.paths.data),
            self.paths.labels.as_ref(),
            Some(&self.paths.out),
        ];
        for p in paths.into_iter().flatten() {
            if !seen.insert(p) {
                return bad(format!("path {} used twice", p.display()));
            }
        }
        let probe = MlpConfig {
            input_dim: 1,
            ..self.mlp.clone()
        };
        probe.validate()
    }

    pub fn hash(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }

    pub fn stage_seeds(&self) -> StageSeeds {
        StageSeeds::new(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub split: u64,
    pub augment: u64,
    pub cluster: u64,
    pub encode: u64,
    pub init: u64,
}

impl StageSeeds {
    pub fn new(seed: u64) -> Self {
        StageSeeds {
            split: seed::stage(seed, "split"),
            augment: seed::stage(seed, "augment"),
            cluster: seed::stage(seed, "cluster"),
            encode: seed::stage(seed, "encode"),
            init: seed::stage(seed, "init"),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Trained classifier: scaler, frozen clustering block and network.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub scaler: ScalerParams,
    pub block: ClusterBlock,
    pub model: MlpModel,
    pub meta: BundleMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub version: u32,
    pub cell_max_samples: usize,
    pub threshold: f64,
    pub encode_seed: u64,
    pub scaler: ScalerParams,
}

impl Bundle {
    fn check(&self) -> Result<()> {
        let expected = self.meta.cell_max_samples * self.block.width();
        if self.model.input_dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.model.input_dim(),
            });
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.block.save(dir.join(BLOCK_FILE))?;
        self.model.save(dir.join(MODEL_FILE))?;
        write_json(&dir.join(BUNDLE_FILE), &self.meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(BUNDLE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: BundleMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let bundle = Bundle {
            scaler: meta.scaler.clone(),
            block: ClusterBlock::load(dir.join(BLOCK_FILE))?,
            model: MlpModel::load(dir.join(MODEL_FILE))?,
            meta,
        };
        bundle.check()?;
        Ok(bundle)
    }

    /// Encodes and scores every cell of an already scaled dataset.
    pub fn score_cells(&self, ds: &CellDataset) -> Result<BTreeMap<CellId, (Label, f64)>> {
        self.check()?;
        ds.by_cell()
            .into_iter()
            .map(|(id, samples)| {
                let x = encode_cell(
                    &self.block,
                    &samples,
                    self.meta.cell_max_samples,
                    seed::child(self.meta.encode_seed, &[id]),
                )?;
                Ok((id, self.model.classify(&x, self.meta.threshold)?))
            })
            .collect()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_cells: usize,
    pub train_samples: usize,
    pub filtered_cells: Vec<CellId>,
    pub prior_quota: usize,
    pub assumed_problematic: Vec<CellId>,
    pub model_count: usize,
    pub block_width: usize,
    pub input_dim: usize,
    pub layer_widths: Vec<usize>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
}

/// Split of a labeled dataset per the configured fraction and split seed.
pub fn split(cfg: &PipelineConfig, ds: &CellDataset) -> Result<(CellDataset, CellDataset)> {
    preprocess::split_train_test(ds, cfg.train_fraction, cfg.stage_seeds().split).stage("split")
}

/// Trains on a raw (unscaled) training side.
pub fn train_bundle(
    cfg: &PipelineConfig,
    raw_train: &CellDataset,
) -> Result<(Bundle, TrainReport)> {
    cfg.validate()?;
    let seeds = cfg.stage_seeds();
    let before = raw_train.cell_ids();
    let filtered =
        preprocess::filter_low_sample_cells(raw_train, cfg.min_samples).stage("preprocess")?;
    let converted = preprocess::convert_units(&filtered).stage("preprocess")?;
    let scaler = preprocess::fit_scaler(&converted).stage("preprocess")?;
    let train = preprocess::apply_scaler(&converted, &scaler);
    let kept: BTreeSet<CellId> = train.cell_ids().into_iter().collect();

    let aggs = prior::aggregate(&train);
    let assumed = prior::select_assumed_problematic(&aggs, cfg.prior_fraction);

    let target = cfg.mlp.cell_max_samples;
    let block = build_block_with(&train, &assumed, target, &cfg.cluster_ks, seeds.cluster)
        .stage("build_block")?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (id, samples) in train.by_cell() {
        let Some(label) = train.label(id) else {
            continue;
        };
        for view in 0..cfg.train_views {
            let view_seed = match view {
                0 => seed::child(seeds.encode, &[id]),
                v => seed::child(seeds.augment, &[id, v as u64]),
            };
            xs.push(encode_cell(&block, &samples, target, view_seed).stage("encode")?);
            ys.push(label);
        }
    }
    let mlp_cfg = MlpConfig {
        input_dim: target * block.width(),
        seed: seeds.init,
        ..cfg.mlp.clone()
    };
    let model = dnn::train(&mlp_cfg, &xs, &ys).stage("train")?;
    let correct = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| model.classify(x, cfg.threshold).map(|(l, _)| l == *y))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();

    let report = TrainReport {
        train_cells: kept.len(),
        train_samples: train.len(),
        filtered_cells: before.into_iter().filter(|id| !kept.contains(id)).collect(),
        prior_quota: prior::quota(cfg.prior_fraction, aggs.len()),
        assumed_problematic: assumed.into_iter().collect(),
        model_count: block.model_count(),
        block_width: block.width(),
        input_dim: mlp_cfg.input_dim,
        layer_widths: layer_widths(&mlp_cfg),
        best_epoch: model.best_epoch,
        best_loss: model.best_loss,
        epoch_losses: model.epoch_losses.clone(),
        train_accuracy: correct as f64 / xs.len() as f64,
    };
    let bundle = Bundle {
        scaler: scaler.clone(),
        block,
        model,
        meta: BundleMeta {
            version: 1,
            cell_max_samples: target,
            threshold: cfg.threshold,
            encode_seed: seeds.encode,
            scaler,
        },
    };
    Ok((bundle, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub confusion: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent for the baseline, which produces no scores.
    pub prc_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellVerdict {
    pub cell_id: CellId,
    pub samples: usize,
    pub truth: Option<Label>,
    pub proposed: Label,
    pub score: f64,
    pub baseline: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub split: String,
    pub cells: usize,
    pub samples: usize,
    pub labeled_cells: usize,
    pub problematic_cells: usize,
    pub proposed: MethodReport,
    pub baseline: Option<MethodReport>,
    pub baseline_thresholds: Option<GlobalThresholds>,
    #[serde(skip)]
    pub verdicts: Vec<CellVerdict>,
    #[serde(skip)]
    pub prc: Vec<PrcPoint>,
}

fn method_report(
    preds: &BTreeMap<CellId, Label>,
    truth: &BTreeMap<CellId, Label>,
    scores: Option<&BTreeMap<CellId, f64>>,
) -> Result<MethodReport> {
    let confusion = metrics::confusion(preds, truth)?;
    let s = metrics::precision_recall_f1(&confusion);
    Ok(MethodReport {
        confusion,
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
        prc_auc: scores.map(|sc| metrics::prc_auc(sc, truth)).transpose()?,
    })
}

/// Scores a raw labeled dataset and compares against its labels.
pub fn evaluate_bundle(
    cfg: &PipelineConfig,
    bundle: &Bundle,
    raw: &CellDataset,
    split_name: &str,
) -> Result<EvaluationReport> {
    let ds = preprocess::transform(raw, &bundle.scaler).stage("preprocess")?;
    let scored = bundle.score_cells(&ds).stage("classify")?;
    let counts = ds.cell_counts();
    let truth: BTreeMap<CellId, Label> = ds.labels.clone();
    if truth.is_empty() {
        return Err(Error::Empty("evaluation requires labeled cells".into())).stage("evaluate");
    }
    let preds: BTreeMap<CellId, Label> = truth.keys().map(|id| (*id, scored[id].0)).collect();
    let scores: BTreeMap<CellId, f64> = truth.keys().map(|id| (*id, scored[id].1)).collect();
    let proposed = method_report(&preds, &truth, Some(&scores)).stage("evaluate")?;
    let prc = metrics::prc_points(&scores, &truth).stage("evaluate")?;

    let (baseline_thresholds, baseline_preds) = if cfg.baseline {
        let (th, verdicts) = baseline::classify_dataset(&ds).stage("baseline")?;
        (Some(th), Some(verdicts))
    } else {
        (None, None)
    };
    let baseline = baseline_preds
        .as_ref()
        .map(|bp| {
            let bp: BTreeMap<CellId, Label> = truth.keys().map(|id| (*id, bp[id])).collect();
            method_report(&bp, &truth, None)
        })
        .transpose()
        .stage("baseline")?;

    let verdicts = scored
        .iter()
        .map(|(id, (label, score))| CellVerdict {
            cell_id: *id,
            samples: counts[id],
            truth: truth.get(id).copied(),
            proposed: *label,
            score: *score,
            baseline: baseline_preds.as_ref().map(|b| b[id]),
        })
        .collect();
    Ok(EvaluationReport {
        split: split_name.to_string(),
        cells: counts.len(),
        samples: ds.len(),
        labeled_cells: truth.len(),
        problematic_cells: truth.values().filter(|l| l.is_problematic()).count(),
        proposed,
        baseline,
        baseline_thresholds,
        verdicts,
        prc,
    })
}

/// Loads the configured data file and, when configured, its labels.
pub fn load_dataset(cfg: &PipelineConfig, require_labels: bool) -> Result<CellDataset> {
    let ds = telemetry::load_csv(&cfg.paths.data, cfg.validation).stage("load")?;
    match &cfg.paths.labels {
        Some(p) => {
            let labels = telemetry::load_labels(p).stage("load")?;
            ds.with_labels(labels).stage("load")
        }
        None if require_labels => {
            Err(Error::InvalidConfig("a labels file is required".into())).stage("load")
        }
        None => Ok(ds),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub crate_version: &'a str,
    pub config_hash: String,
    pub config: &'a PipelineConfig,
    pub stage_seeds: StageSeeds,
    pub inputs: Vec<InputHash>,
}

pub fn write_manifest(cfg: &PipelineConfig, command: &str, inputs: &[&Path]) -> Result<()> {
    let inputs = inputs
        .iter()
        .map(|p| {
            Ok(InputHash {
                path: p.to_path_buf(),
                sha256: file_sha256(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        command,
        crate_version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        config: cfg,
        stage_seeds: cfg.stage_seeds(),
        inputs,
    };
    write_json(
        &cfg.paths.out.join(format!("{command}.{MANIFEST_FILE}")),
        &manifest,
    )
}

/// Exclusive lock on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn input_paths(cfg: &PipelineConfig) -> Vec<&Path> {
    std::iter::once(cfg.paths.data.as_path())
        .chain(cfg.paths.labels.as_deref())
        .collect()
}

/// `train`: split, preprocess, prior, block, network; writes the bundle,
/// training report and manifest into the output directory.
pub fn run_train(cfg: &PipelineConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let _lock = OutputLock::acquire(&cfg.paths.out)?;
    let ds = load_dataset(cfg, true)?;
    let (train, _) = split(cfg, &ds)?;
    let (bundle, report) = train_bundle(cfg, &train)?;
    bundle.save(&cfg.paths.out).stage("save")?;
    write_json(&cfg.paths.out.join(TRAIN_REPORT_FILE), &report).stage("save")?;
    write_manifest(cfg, "train", &input_paths(cfg)).stage("save")?;
    Ok(report)
}

/// `evaluate`: scores the test side (or the training side when `on_train`)
/// with a trained bundle and writes the summary, verdicts and PRC files.
pub fn run_evaluate(
    cfg: &PipelineConfig,
    bundle_dir: &Path,
    on_train: bool,
) -> Result<EvaluationReport> {
    cfg.validate()?;
    let _lock = OutputLock::acquire(&cfg.paths.out)?;
    let bundle = Bundle::load(bundle_dir).stage("load_bundle")?;
    let ds = load_dataset(cfg, true)?;
    let (train, test) = split(cfg, &ds)?;
    let report = if on_train {
        let train =
            preprocess::filter_low_sample_cells(&train, cfg.min_samples).stage("preprocess")?;
        evaluate_bundle(cfg, &bundle, &train, "train")?
    } else {
        evaluate_bundle(cfg, &bundle, &test, "test")?
    };
    let out = &cfg.paths.out;
    write_json(&out.join(EVAL_REPORT_FILE), &report).stage("save")?;
    write_verdicts(&out.join(VERDICTS_FILE), &report.verdicts).stage("save")?;
    write_prc(&out.join(PRC_FILE), &report.prc).stage("save")?;
    write_manifest(cfg, "evaluate", &input_paths(cfg)).stage("save")?;
    Ok(report)
}

/// `classify`: verdict and score for every cell of an unlabeled file.
pub fn run_classify(
    bundle_dir: &Path,
    data: &Path,
    validation: Validation,
    out: &Path,
) -> Result<Vec<CellVerdict>> {
    let bundle = Bundle::load(bundle_dir).stage("load_bundle")?;
    let raw = telemetry::load_csv(data, validation).stage("load")?;
    let ds = preprocess::transform(&raw, &bundle.scaler).stage("preprocess")?;
    let counts = ds.cell_counts();
    let verdicts: Vec<CellVerdict> = bundle
        .score_cells(&ds)
        .stage("classify")?
        .into_iter()
        .map(|(cell_id, (proposed, score))| CellVerdict {
            cell_id,
            samples: counts[&cell_id],
            truth: None,
            proposed,
            score,
            baseline: None,
        })
        .collect();
    write_verdicts(out, &verdicts).stage("save")?;
    Ok(verdicts)
}

fn label_field(l: Option<Label>) -> String {
    l.map(|l| l.as_u8().to_string()).unwrap_or_default()
}

pub fn write_verdicts(path: &Path, verdicts: &[CellVerdict]) -> Result<()> {
    let mut out = String::from("cell_id,samples,truth,proposed,score,baseline\n");
    for v in verdicts {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            v.cell_id,
            v.samples,
            label_field(v.truth),
            v.proposed.as_u8(),
            v.score,
            label_field(v.baseline)
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_prc(path: &Path, points: &[PrcPoint]) -> Result<()> {
    let mut out = String::from("threshold,precision,recall\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Scaled training side after filtering, as used for prior selection.
fn scaled_train(cfg: &PipelineConfig) -> Result<(CellDataset, CellDataset)> {
    let ds = load_dataset(cfg, false)?;
    let (train, test) = split(cfg, &ds)?;
    let prepared = preprocess::prepare(&train, &test, cfg.min_samples).stage("preprocess")?;
    Ok((prepared.train, prepared.test))
}

/// `preprocess`: writes the scaled train and test sides (optionally with
/// scrambled identifiers).
pub fn run_preprocess(cfg: &PipelineConfig, scramble: bool) -> Result<(CellDataset, CellDataset)> {
    cfg.validate()?;
    let _lock = OutputLock::acquire(&cfg.paths.out)?;
    let (mut train, mut test) = scaled_train(cfg)?;
    if scramble {
        let s = seed::stage(cfg.seed, "scramble");
        train = telemetry::scramble_ids(&train, s);
        test = telemetry::scramble_ids(&test, s);
    }
    let out = &cfg.paths.out;
    telemetry::save_csv(out.join("train.csv"), &train).stage("save")?;
    telemetry::save_csv(out.join("test.csv"), &test).stage("save")?;
    if !train.labels.is_empty() {
        telemetry::save_labels(out.join("train_labels.csv"), &train.labels).stage("save")?;
        telemetry::save_labels(out.join("test_labels.csv"), &test.labels).stage("save")?;
    }
    write_manifest(cfg, "preprocess", &input_paths(cfg)).stage("save")?;
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorRow {
    pub aggregates: CellAggregates,
    pub selected: bool,
}

/// `inspect-prior`: per-cell two-stage averages with the selection flag.
pub fn run_inspect_prior(cfg: &PipelineConfig) -> Result<Vec<PriorRow>> {
    cfg.validate()?;
    let _lock = OutputLock::acquire(&cfg.paths.out)?;
    let (train, _) = scaled_train(cfg)?;
    let aggs = prior::aggregate(&train);
    let selected = prior::select_assumed_problematic(&aggs, cfg.prior_fraction);
    let rows: Vec<PriorRow> = aggs
        .into_iter()
        .map(|a| PriorRow {
            selected: selected.contains(&a.cell_id),
            aggregates: a,
        })
        .collect();
    let mut out = String::from("cell_id,t_avg_cell,c_avg_cell,selected\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.aggregates.cell_id,
            r.aggregates.throughput,
            r.aggregates.cqi,
            u8::from(r.selected)
        ));
    }
    let path = cfg.paths.out.join("prior.csv");
    fs::write(&path, out)
        .map_err(|e| Error::io(&path, e))
        .stage("save")?;
    write_manifest(cfg, "inspect-prior", &input_paths(cfg)).stage("save")?;
    Ok(rows)
}

/// `baseline`: verdicts on the scaled test side plus a per-sample scatter
/// export (throughput, CQI, exceeds-both-thresholds flag).
pub fn run_baseline(cfg: &PipelineConfig) -> Result<BTreeMap<CellId, Label>> {
    cfg.validate()?;
    let _lock = OutputLock::acquire(&cfg.paths.out)?;
    let (_, test) = scaled_train(cfg)?;
    let (th, verdicts) = baseline::classify_dataset(&test).stage("baseline")?;
    let groups = test.by_cell();
    let mut out = String::from("cell_id,samples,exceeding_fraction,baseline,truth\n");
    for (id, label) in &verdicts {
        let frac = baseline::exceeding_fraction(&groups[id], &th)?;
        out.push_str(&format!(
            "{id},{},{frac},{},{}\n",
            groups[id].len(),
            label.as_u8(),
            label_field(test.label(*id))
        ));
    }
    let path = cfg.paths.out.join("baseline_verdicts.csv");
    fs::write(&path, out)
        .map_err(|e| Error::io(&path, e))
        .stage("save")?;

    let mut scatter = String::from("cell_id,throughput,cqi,exceeds\n");
    for s in &test.samples {
        scatter.push_str(&format!(
            "{},{},{},{}\n",
            s.cell_id,
            s.throughput_kbps,
            s.cqi,
            u8::from(baseline::exceeds_thresholds(s, &th))
        ));
    }
    let path = cfg.paths.out.join("baseline_scatter.csv");
    fs::write(&path, scatter)
        .map_err(|e| Error::io(&path, e))
        .stage("save")?;
    if !test.labels.is_empty() && verdicts.keys().eq(test.labels.keys()) {
        let report = method_report(&verdicts, &test.labels, None)?;
        write_json(&cfg.paths.out.join("baseline_report.json"), &report).stage("save")?;
    }
    write_manifest(cfg, "baseline", &input_paths(cfg)).stage("save")?;
    Ok(verdicts)
}
