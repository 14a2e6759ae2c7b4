use std::path::PathBuf;

use crate::telemetry::CellId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{0}: file is empty")]
    EmptyFile(PathBuf),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("row {row}: field `{field}` has non-numeric value `{value}`")]
    Parse {
        row: usize,
        field: String,
        value: String,
    },

    #[error("row {row}: field `{field}` = {value} is out of range ({expected})")]
    OutOfRange {
        row: usize,
        field: String,
        value: f64,
        expected: String,
    },

    #[error("row {row}: label `{value}` is not 0 or 1")]
    InvalidLabel { row: usize, value: String },

    #[error("duplicate label for cell {0}")]
    DuplicateLabel(CellId),

    #[error("label given for cell {0} which has no samples")]
    LabelWithoutSamples(CellId),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("cell {cell_id} has {count} samples, at least {needed} required")]
    TooFewSamples {
        cell_id: CellId,
        count: usize,
        needed: usize,
    },

    #[error("cannot fit {k} clusters to {n} points")]
    NotEnoughPoints { n: usize, k: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no assumed-problematic cells to build the clustering block from")]
    EmptyAssumedSet,

    #[error("cell {0} not present in dataset")]
    UnknownCell(CellId),

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),

    #[error("prediction and truth cover different cells")]
    KeyMismatch,

    #[error("no problematic cells among the labels; PRC AUC is undefined")]
    NoPositives,

    #[error("bundle format: {0}")]
    Format(String),

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

/// Tags errors with the pipeline stage that produced them.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
