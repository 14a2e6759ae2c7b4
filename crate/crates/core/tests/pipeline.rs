use std::path::Path;

use celltriage::dnn::MlpConfig;
use celltriage::pipeline::{self, file_sha256, Bundle, Paths, PipelineConfig};
use celltriage::synthgen::{generate, IntRange, SynthConfig};
use celltriage::telemetry::{save_csv, save_labels, Validation};
use celltriage::{CellDataset, Error, Label};

fn small_data() -> CellDataset {
    generate(&SynthConfig {
        n_cells: 14,
        n_problematic: 3,
        n_congested: 1,
        ues_per_cell: IntRange::new(6, 9),
        samples_per_ue: IntRange::new(4, 6),
        seed: 5,
        noise: 0.25,
    })
    .unwrap()
}

fn write_inputs(dir: &Path, ds: &CellDataset) -> PipelineConfig {
    let data = dir.join("data.csv");
    let labels = dir.join("labels.csv");
    save_csv(&data, ds).unwrap();
    save_labels(&labels, &ds.labels).unwrap();
    let out = dir.join("out");
    std::fs::create_dir_all(&out).unwrap();
    PipelineConfig {
        paths: Paths {
            data,
            labels: Some(labels),
            out,
        },
        seed: 3,
        min_samples: 10,
        cluster_ks: vec![2, 3, 4],
        train_views: 2,
        mlp: MlpConfig {
            hidden_layers: 1,
            units_per_layer: 8,
            cell_max_samples: 12,
            max_epochs: 30,
            ..MlpConfig::default()
        },
        ..PipelineConfig::default()
    }
}

#[test]
fn train_evaluate_classify() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_data();
    let cfg = write_inputs(dir.path(), &ds);
    let inputs = [cfg.paths.data.clone(), cfg.paths.labels.clone().unwrap()];
    let before: Vec<String> = inputs.iter().map(|p| file_sha256(p).unwrap()).collect();

    let report = pipeline::run_train(&cfg).unwrap();
    assert_eq!(report.train_cells, 14);
    assert!(!report.assumed_problematic.is_empty());
    assert_eq!(report.model_count, 6 * report.assumed_problematic.len());
    assert_eq!(report.input_dim, 12 * report.block_width);
    assert_eq!(report.layer_widths, vec![8]);

    let eval = pipeline::run_evaluate(&cfg, &cfg.paths.out, false).unwrap();
    assert_eq!(eval.cells, 14);
    assert_eq!(eval.problematic_cells, 3);
    assert!(eval.proposed.prc_auc.is_some());
    assert!(eval.baseline.is_some());
    let out = &cfg.paths.out;
    for f in [
        pipeline::BLOCK_FILE,
        pipeline::MODEL_FILE,
        pipeline::BUNDLE_FILE,
        pipeline::TRAIN_REPORT_FILE,
        pipeline::EVAL_REPORT_FILE,
        pipeline::VERDICTS_FILE,
        pipeline::PRC_FILE,
        "train.manifest.json",
        "evaluate.manifest.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let manifest = std::fs::read_to_string(out.join("train.manifest.json")).unwrap();
    assert!(manifest.contains(&before[0]));

    let verdicts_path = dir.path().join("classified.csv");
    let verdicts =
        pipeline::run_classify(out, &cfg.paths.data, Validation::Strict, &verdicts_path).unwrap();
    assert_eq!(verdicts.len(), 14);
    let text = std::fs::read_to_string(&verdicts_path).unwrap();
    assert_eq!(text.lines().count(), 15);

    let after: Vec<String> = inputs.iter().map(|p| file_sha256(p).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn single_sample_cell_is_classified() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_data();
    let cfg = write_inputs(dir.path(), &ds);
    pipeline::run_train(&cfg).unwrap();
    let one = CellDataset::unlabeled(vec![ds.samples[0]]);
    let path = dir.path().join("one.csv");
    save_csv(&path, &one).unwrap();
    let v = pipeline::run_classify(
        &cfg.paths.out,
        &path,
        Validation::Strict,
        &dir.path().join("v.csv"),
    )
    .unwrap();
    assert_eq!(v.len(), 1);
    assert!((0.0..=1.0).contains(&v[0].score));
}

#[test]
fn missing_labels_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = write_inputs(dir.path(), &small_data());
    cfg.paths.labels = Some(dir.path().join("absent_labels.csv"));
    let err = pipeline::run_train(&cfg).unwrap_err().to_string();
    assert!(err.starts_with("load:"), "{err}");
    assert!(err.contains("absent_labels.csv"), "{err}");
}

#[test]
fn no_positive_test_cells_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_data();
    let cfg = write_inputs(dir.path(), &ds);
    pipeline::run_train(&cfg).unwrap();
    let bundle = Bundle::load(&cfg.paths.out).unwrap();
    let mut normal = ds.clone();
    normal.labels.values_mut().for_each(|l| *l = Label::Normal);
    let err = pipeline::evaluate_bundle(&cfg, &bundle, &normal, "test").unwrap_err();
    assert!(
        matches!(err, Error::Stage { ref source, .. } if matches!(**source, Error::NoPositives)),
        "{err}"
    );
}

#[test]
fn stale_bundle_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_data();
    let cfg = write_inputs(dir.path(), &ds);
    pipeline::run_train(&cfg).unwrap();

    let other_dir = tempfile::tempdir().unwrap();
    let mut other = write_inputs(other_dir.path(), &ds);
    other.mlp.cell_max_samples = 7;
    pipeline::run_train(&other).unwrap();
    std::fs::copy(
        other.paths.out.join(pipeline::BUNDLE_FILE),
        cfg.paths.out.join(pipeline::BUNDLE_FILE),
    )
    .unwrap();
    let err = Bundle::load(&cfg.paths.out).unwrap_err().to_string();
    assert!(err.contains("dimension mismatch"), "{err}");
}

#[test]
fn locked_output_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_inputs(dir.path(), &small_data());
    let _held = pipeline::OutputLock::acquire(&cfg.paths.out).unwrap();
    assert!(matches!(pipeline::run_train(&cfg), Err(Error::Locked(_))));
}

#[test]
fn preprocess_inspect_and_baseline_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_inputs(dir.path(), &small_data());
    let (train, test) = pipeline::run_preprocess(&cfg, true).unwrap();
    assert_eq!(train.cell_ids().len(), 14);
    assert_eq!(test.cell_ids().len(), 14);
    let rows = pipeline::run_inspect_prior(&cfg).unwrap();
    assert_eq!(rows.len(), 14);
    let verdicts = pipeline::run_baseline(&cfg).unwrap();
    assert_eq!(verdicts.len(), 14);
    for f in [
        "train.csv",
        "test.csv",
        "prior.csv",
        "baseline_verdicts.csv",
        "baseline_scatter.csv",
        "baseline_report.json",
    ] {
        assert!(cfg.paths.out.join(f).is_file(), "{f} missing");
    }
}
