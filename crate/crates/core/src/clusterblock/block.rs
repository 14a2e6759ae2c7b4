use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_gmm, train_kmeans, GmmModel, KMeansModel, Matrix};
use crate::error::{Error, Result};
use crate::preprocess::fix_sample_count;
use crate::seed;
use crate::telemetry::{CellDataset, CellId, Feature, Sample};

/// Cluster counts trained per algorithm and cell.
pub const DEFAULT_KS: [usize; 9] = [2, 3, 4, 5, 6, 7, 8, 9, 10];

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    Gmm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::KMeans, Algorithm::Gmm];

    fn tag(self) -> u64 {
        match self {
            Algorithm::KMeans => 0,
            Algorithm::Gmm => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClusterModel {
    KMeans(KMeansModel),
    Gmm(GmmModel),
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        match self {
            ClusterModel::KMeans(m) => m.k,
            ClusterModel::Gmm(m) => m.k,
        }
    }

    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        match self {
            ClusterModel::KMeans(m) => m.assign(x),
            ClusterModel::Gmm(m) => m.assign(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub cell_id: CellId,
    pub algorithm: Algorithm,
    pub k: usize,
    pub model: ClusterModel,
}

/// Frozen ensemble of clustering models. There is no way to mutate a block
/// after [`build_block`] returns it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBlock {
    version: u32,
    features: Vec<Feature>,
    seed: u64,
    target_samples: usize,
    entries: Vec<BlockEntry>,
}

impl ClusterBlock {
    pub fn entries(&self) -> &[BlockEntry] {
        &self.entries
    }

    pub fn model_count(&self) -> usize {
        self.entries.len()
    }

    /// Total one-hot width: the sum of every model's cluster count.
    pub fn width(&self) -> usize {
        self.entries.iter().map(|e| e.k).sum()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn target_samples(&self) -> usize {
        self.target_samples
    }

    /// Distinct source cells in block order.
    pub fn source_cells(&self) -> Vec<CellId> {
        let mut cells: Vec<CellId> = self.entries.iter().map(|e| e.cell_id).collect();
        cells.dedup();
        cells
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let block: ClusterBlock = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if block.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported block version {}",
                path.display(),
                block.version
            )));
        }
        if block.features != Feature::ALL {
            return Err(Error::Format(
                "block feature order differs from this build".into(),
            ));
        }
        Ok(block)
    }
}

fn feature_matrix(samples: &[Sample]) -> Result<Matrix> {
    let data: Vec<f64> = samples.iter().flat_map(|s| s.features()).collect();
    Matrix::new(samples.len(), Feature::COUNT, data)
}

pub fn build_block(
    train: &CellDataset,
    assumed: &BTreeSet<CellId>,
    target_samples: usize,
    seed: u64,
) -> Result<ClusterBlock> {
    build_block_with(train, assumed, target_samples, &DEFAULT_KS, seed)
}

/// Trains K-Means and GMM at every `k` in `ks` on each assumed cell.
///
/// Each cell is first brought to `target_samples`. Models are ordered by cell
/// id, then algorithm, then k, and seeded from `(seed, cell, algorithm, k)`, so
/// the parallel build is identical to a serial one.
pub fn build_block_with(
    train: &CellDataset,
    assumed: &BTreeSet<CellId>,
    target_samples: usize,
    ks: &[usize],
    seed: u64,
) -> Result<ClusterBlock> {
    if assumed.is_empty() {
        return Err(Error::EmptyAssumedSet);
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidConfig(
            "cluster counts must be non-empty and >= 1".into(),
        ));
    }
    let groups = train.by_cell();
    let mut matrices = Vec::with_capacity(assumed.len());
    for &cell_id in assumed {
        let samples = groups.get(&cell_id).ok_or(Error::UnknownCell(cell_id))?;
        let fixed = fix_sample_count(
            samples,
            target_samples,
            seed::child(seed, &[cell_id, u64::MAX]),
        )?;
        matrices.push((cell_id, feature_matrix(&fixed)?));
    }

    let grid: Vec<(usize, Algorithm, usize)> = (0..matrices.len())
        .flat_map(|c| {
            Algorithm::ALL
                .into_iter()
                .flat_map(move |a| ks.iter().map(move |&k| (c, a, k)))
        })
        .collect();
    let entries = grid
        .into_par_iter()
        .map(|(c, algorithm, k)| {
            let (cell_id, x) = &matrices[c];
            let model_seed = seed::child(seed, &[*cell_id, algorithm.tag(), k as u64]);
            let model = match algorithm {
                Algorithm::KMeans => ClusterModel::KMeans(train_kmeans(x, k, model_seed)?),
                Algorithm::Gmm => ClusterModel::Gmm(train_gmm(x, k, model_seed)?),
            };
            Ok(BlockEntry {
                cell_id: *cell_id,
                algorithm,
                k,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ClusterBlock {
        version: FORMAT_VERSION,
        features: Feature::ALL.to_vec(),
        seed,
        target_samples,
        entries,
    })
}

/// Flattened one-hot encoding of a cell: `target_samples` rows of width
/// [`ClusterBlock::width`], row-major.
///
/// Rows are sorted (descending, lexicographic) so that row positions do not
/// depend on the order samples arrived in.
pub fn encode_cell(
    block: &ClusterBlock,
    samples: &[Sample],
    target_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let fixed = fix_sample_count(samples, target_samples, seed)?;
    let width = block.width();
    let mut out = vec![0.0; target_samples * width];
    for (row, s) in out.chunks_exact_mut(width).zip(&fixed) {
        let x = s.features();
        let mut offset = 0;
        for entry in &block.entries {
            row[offset + entry.model.assign(&x)?] = 1.0;
            offset += entry.k;
        }
    }
    let mut rows: Vec<&[f64]> = out.chunks_exact(width).collect();
    rows.sort_by(|a, b| b.partial_cmp(a).expect("one-hot rows are finite"));
    Ok(rows.concat())
}
