use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, train_kmeans, Matrix};
use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;
const MAX_ITER: usize = 200;
const LL_TOL: f64 = 1e-6;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// Training log-likelihood of the returned parameters.
    pub log_likelihood: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Log-likelihood before the first M-step and after each one.
    #[serde(default, skip_serializing)]
    pub ll_history: Vec<f64>,
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn log_joint(&self, x: &[f64], out: &mut [f64]) {
        for (j, slot) in out.iter_mut().enumerate() {
            let mut lp = self.weights[j].ln();
            for ((v, m), var) in x.iter().zip(&self.means[j]).zip(&self.variances[j]) {
                let diff = v - m;
                lp -= 0.5 * (LN_2PI + var.ln() + diff * diff / var);
            }
            *slot = lp;
        }
    }

    /// Posterior component probabilities; entries sum to 1.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x)?;
        let mut r = vec![0.0; self.k];
        self.log_joint(x, &mut r);
        normalize_log(&mut r);
        Ok(r)
    }

    /// Most responsible component, lowest index on ties.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.dim(), x)?;
        let mut r = vec![0.0; self.k];
        self.log_joint(x, &mut r);
        Ok(argmax(&r))
    }
}

/// Turns log weights into probabilities in place; returns the log normalizer.
fn normalize_log(v: &mut [f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = v.iter().map(|l| (l - max).exp()).sum();
    let lse = max + sum.ln();
    for l in v.iter_mut() {
        *l = (*l - lse).exp();
    }
    lse
}

fn e_step(model: &GmmModel, x: &Matrix, resp: &mut [f64]) -> f64 {
    let k = model.k;
    x.iter_rows()
        .zip(resp.chunks_exact_mut(k))
        .map(|(r, out)| {
            model.log_joint(r, out);
            normalize_log(out)
        })
        .sum()
}

fn m_step(model: &mut GmmModel, x: &Matrix, resp: &[f64]) {
    let (n, d, k) = (x.rows(), x.cols(), model.k);
    for j in 0..k {
        let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
        if nk <= f64::MIN_POSITIVE {
            // Component lost all support: keep its shape, drop its weight.
            model.weights[j] = 0.0;
            continue;
        }
        let mut mean = vec![0.0; d];
        for (i, r) in x.iter_rows().enumerate() {
            let w = resp[i * k + j];
            for (m, v) in mean.iter_mut().zip(r) {
                *m += w * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut var = vec![0.0; d];
        for (i, r) in x.iter_rows().enumerate() {
            let w = resp[i * k + j];
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += w * (v - m) * (v - m);
            }
        }
        var.iter_mut()
            .for_each(|s| *s = (*s / nk).max(VARIANCE_FLOOR));
        model.weights[j] = nk / n as f64;
        model.means[j] = mean;
        model.variances[j] = var;
    }
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);
}

/// EM for a diagonal-covariance mixture, initialized from K-Means.
pub fn train_gmm(x: &Matrix, k: usize, seed: u64) -> Result<GmmModel> {
    let (n, d) = (x.rows(), x.cols());
    if k == 0 || n < k {
        return Err(Error::NotEnoughPoints { n, k });
    }
    let km = train_kmeans(x, k, seed)?;

    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; d]; k];
    let labels: Vec<usize> = x
        .iter_rows()
        .map(|r| km.assign(r).expect("dimension checked"))
        .collect();
    for (r, &j) in x.iter_rows().zip(&labels) {
        counts[j] += 1;
        for ((s, v), c) in sums[j].iter_mut().zip(r).zip(&km.centroids[j]) {
            *s += (v - c) * (v - c);
        }
    }
    let variances = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| {
            s.into_iter()
                .map(|v| (v / c.max(1) as f64).max(VARIANCE_FLOOR))
                .collect()
        })
        .collect();
    // Every point lands in some cluster, so at least one weight is positive;
    // the small additive term keeps empty clusters alive for the first E-step.
    let weights: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 + 1e-3) / (n as f64 + 1e-3 * k as f64))
        .collect();

    let mut model = GmmModel {
        k,
        weights,
        means: km.centroids,
        variances,
        log_likelihood: f64::NEG_INFINITY,
        seed,
        iterations: 0,
        ll_history: Vec::new(),
    };
    let mut resp = vec![0.0; n * k];
    let mut ll = e_step(&model, x, &mut resp);
    model.ll_history.push(ll);
    for _ in 0..MAX_ITER {
        m_step(&mut model, x, &resp);
        model.iterations += 1;
        let next = e_step(&model, x, &mut resp);
        debug_assert!(
            next >= ll - 1e-8 * ll.abs().max(1.0),
            "EM decreased: {ll} -> {next}"
        );
        model.ll_history.push(next);
        let gain = next - ll;
        ll = next;
        if gain < LL_TOL {
            break;
        }
    }
    model.log_likelihood = ll;
    Ok(model)
}
