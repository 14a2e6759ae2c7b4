use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_dim, squared_distance, Matrix};
use crate::error::{Error, Result};
use crate::seed;

const MAX_ITER: usize = 300;
const SHIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Inertia after each assignment step.
    #[serde(default, skip_serializing)]
    pub inertia_history: Vec<f64>,
}

impl KMeansModel {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Nearest centroid by squared Euclidean distance, lowest index on ties.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim(), x)?;
        Ok(nearest(&self.centroids, x).0)
    }
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(x: &Matrix, k: usize, rng: &mut seed::Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centroids = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = x
        .iter_rows()
        .map(|r| squared_distance(r, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with existing centroids.
            rng.random_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (d, r) in d2.iter_mut().zip(x.iter_rows()) {
            *d = d.min(squared_distance(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// Empty clusters are re-seeded at the point farthest from its centroid.
/// Inputs made only of duplicates give a zero-inertia degenerate model.
pub fn train_kmeans(x: &Matrix, k: usize, seed: u64) -> Result<KMeansModel> {
    let n = x.rows();
    if k == 0 || n < k {
        return Err(Error::NotEnoughPoints { n, k });
    }
    let d = x.cols();
    let mut rng = seed::rng(seed);
    let mut centroids = plus_plus_init(x, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..MAX_ITER {
        iterations += 1;
        let mut inertia = 0.0;
        for (i, r) in x.iter_rows().enumerate() {
            let (j, dist) = nearest(&centroids, r);
            labels[i] = j;
            dists[i] = dist;
            inertia += dist;
        }
        debug_assert!(history
            .last()
            .is_none_or(|&prev: &f64| inertia <= prev + 1e-9 * prev.max(1.0)));
        history.push(inertia);

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (r, &j) in x.iter_rows().zip(&labels) {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(r) {
                *s += v;
            }
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| {
                if c == 0 {
                    s
                } else {
                    s.into_iter().map(|v| v / c as f64).collect()
                }
            })
            .collect();
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = (0..n)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .unwrap();
            next[j] = x.row(far).to_vec();
            dists[far] = 0.0;
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < SHIFT_TOL {
            break;
        }
    }

    let inertia = x.iter_rows().map(|r| nearest(&centroids, r).1).sum();
    Ok(KMeansModel {
        k,
        centroids,
        inertia,
        seed,
        iterations,
        inertia_history: history,
    })
}
