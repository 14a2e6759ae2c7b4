use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use celltriage::pipeline::{self, PipelineConfig};
use celltriage::synthgen::{self, SynthConfig};
use celltriage::telemetry::{self, Validation};
use celltriage::Error;

#[derive(Parser)]
#[command(
    name = "celltriage",
    version,
    about = "Classify LTE cells as throughput-problematic or normal"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (output file for `generate` and `classify`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Inputs {
    /// Sample CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Cell label CSV.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Clamp out-of-range values instead of rejecting the file.
    #[arg(long)]
    clamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with planted problematic cells.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Where to write the label CSV.
        #[arg(long, default_value = "labels.csv")]
        labels: PathBuf,
    },
    /// Split, convert and scale; writes train/test CSVs.
    Preprocess {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Replace cell and UE identifiers with seeded random ones.
        #[arg(long)]
        scramble: bool,
    },
    /// Dump per-cell averages and the prior selection.
    InspectPrior {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Train the clustering block and network.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Score a trained bundle on the held-out side of the split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Bundle directory; defaults to the output directory.
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Evaluate on the training side instead (optimistic).
        #[arg(long)]
        on_train: bool,
    },
    /// Classify every cell of an unlabeled file.
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Bundle directory.
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Run the threshold baseline on the held-out side.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
    },
}

fn pipeline_config(common: &Common, inputs: &Inputs) -> celltriage::Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.paths.out = out.clone();
    }
    if let Some(data) = &inputs.data {
        cfg.paths.data = data.clone();
    }
    if let Some(labels) = &inputs.labels {
        cfg.paths.labels = Some(labels.clone());
    }
    if inputs.clamp {
        cfg.validation = Validation::Clamp;
    }
    cfg.validate()?;
    create_dir(&cfg.paths.out)?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> celltriage::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn generate(common: &Common, labels: &Path) -> celltriage::Result<()> {
    let mut cfg = match &common.config {
        Some(path) => SynthConfig::load(path)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| "data.csv".into());
    if out == labels {
        return Err(Error::InvalidConfig(
            "--out and --labels must differ".into(),
        ));
    }
    let ds = synthgen::generate(&cfg)?;
    telemetry::save_csv(&out, &ds)?;
    telemetry::save_labels(labels, &ds.labels)?;
    println!(
        "generated {} samples over {} cells ({} problematic) -> {}",
        ds.len(),
        ds.labels.len(),
        ds.labels.values().filter(|l| l.is_problematic()).count(),
        out.display()
    );
    Ok(())
}

fn print_method(name: &str, m: &pipeline::MethodReport) {
    let auc = m.prc_auc.map_or("-".to_string(), |a| format!("{a:.3}"));
    println!(
        "{name:<9} precision {:.3}  recall {:.3}  f1 {:.3}  prc-auc {auc}",
        m.precision, m.recall, m.f1
    );
}

fn run(cli: Cli) -> celltriage::Result<()> {
    match cli.command {
        Command::Generate { common, labels } => generate(&common, &labels),
        Command::Preprocess {
            common,
            inputs,
            scramble,
        } => {
            let cfg = pipeline_config(&common, &inputs)?;
            let (train, test) = pipeline::run_preprocess(&cfg, scramble)?;
            println!(
                "train {} samples, test {} samples -> {}",
                train.len(),
                test.len(),
                cfg.paths.out.display()
            );
            Ok(())
        }
        Command::InspectPrior { common, inputs } => {
            let cfg = pipeline_config(&common, &inputs)?;
            let rows = pipeline::run_inspect_prior(&cfg)?;
            let picked: Vec<_> = rows
                .iter()
                .filter(|r| r.selected)
                .map(|r| r.aggregates.cell_id)
                .collect();
            println!(
                "{} of {} cells assumed problematic: {picked:?}",
                picked.len(),
                rows.len()
            );
            Ok(())
        }
        Command::Train { common, inputs } => {
            let cfg = pipeline_config(&common, &inputs)?;
            let report = pipeline::run_train(&cfg)?;
            println!(
                "trained on {} cells; {} assumed problematic, {} clustering models, input {}, layers {:?}",
                report.train_cells,
                report.assumed_problematic.len(),
                report.model_count,
                report.input_dim,
                report.layer_widths
            );
            println!(
                "best epoch {} loss {:.6}, train accuracy {:.3}",
                report.best_epoch, report.best_loss, report.train_accuracy
            );
            Ok(())
        }
        Command::Evaluate {
            common,
            inputs,
            bundle,
            on_train,
        } => {
            let cfg = pipeline_config(&common, &inputs)?;
            let bundle = bundle.unwrap_or_else(|| cfg.paths.out.clone());
            if on_train {
                warn!("evaluating on the training side; scores are optimistic");
            }
            let report = pipeline::run_evaluate(&cfg, &bundle, on_train)?;
            println!("{} cells on the {} side", report.cells, report.split);
            print_method("proposed", &report.proposed);
            if let Some(b) = &report.baseline {
                print_method("baseline", b);
            }
            Ok(())
        }
        Command::Classify {
            common,
            inputs,
            bundle,
        } => {
            let mut cfg = match &common.config {
                Some(path) => PipelineConfig::load(path)?,
                None => PipelineConfig::default(),
            };
            if let Some(data) = &inputs.data {
                cfg.paths.data = data.clone();
            }
            if inputs.clamp {
                cfg.validation = Validation::Clamp;
            }
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| pipeline::VERDICTS_FILE.into());
            let verdicts = pipeline::run_classify(&bundle, &cfg.paths.data, cfg.validation, &out)?;
            let flagged = verdicts
                .iter()
                .filter(|v| v.proposed.is_problematic())
                .count();
            println!(
                "{flagged} of {} cells problematic -> {}",
                verdicts.len(),
                out.display()
            );
            Ok(())
        }
        Command::Baseline { common, inputs } => {
            let cfg = pipeline_config(&common, &inputs)?;
            let verdicts = pipeline::run_baseline(&cfg)?;
            let flagged = verdicts.values().filter(|l| l.is_problematic()).count();
            println!("baseline flags {flagged} of {} cells", verdicts.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let e = match e {
                e @ Error::Stage { .. } => e,
                e => Error::Stage {
                    stage: "setup",
                    source: Box::new(e),
                },
            };
            eprintln!("error: {e}");
            info!("{e:?}");
            ExitCode::FAILURE
        }
    }
}
