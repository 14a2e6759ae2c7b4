//! Multilayer perceptron binary classifier over clustering-block encodings.
//!
//! Hidden layers use ReLU, the two-unit output uses softmax, and the loss is
//! the mean squared error against the one-hot target, optionally with an L1
//! penalty on the output-layer weights. Inputs are mostly zeros (one-hot
//! rows), so forward and backward passes skip zero activations.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::telemetry::Label;

pub const DEFAULT_L1_LAMBDA: f64 = 1e-4;
const MAGIC: &[u8; 8] = b"CTMLP\0\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub units_per_layer: usize,
    pub hidden_layers: usize,
    pub decreasing_units: bool,
    /// Use `U_l = U_{l-1} / 2` instead of the literal `U_{l-1} / 2^l` decay.
    pub halving: bool,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub l1_lambda: f64,
    pub seed: u64,
    pub cell_max_samples: usize,
    /// Mini-batch size; `None` means full-batch gradient descent.
    pub batch_size: Option<usize>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 0,
            units_per_layer: 100,
            hidden_layers: 4,
            decreasing_units: true,
            halving: false,
            learning_rate: 0.001,
            max_epochs: 100,
            l1_lambda: 0.0,
            seed: 0,
            cell_max_samples: 100,
            batch_size: None,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.input_dim == 0 {
            return bad("input_dim must be >= 1");
        }
        if self.units_per_layer == 0 {
            return bad("units_per_layer must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.l1_lambda >= 0.0 && self.l1_lambda.is_finite()) {
            return bad("l1_lambda must be >= 0");
        }
        if self.cell_max_samples == 0 {
            return bad("cell_max_samples must be >= 1");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be >= 1");
        }
        Ok(())
    }
}

/// Hidden layer widths.
///
/// With decreasing units, layer `l >= 2` has `floor(U_{l-1} / 2^l)` units
/// (or `U_{l-1} / 2` with `halving`), never fewer than one.
pub fn layer_widths(cfg: &MlpConfig) -> Vec<usize> {
    let mut widths: Vec<usize> = Vec::with_capacity(cfg.hidden_layers);
    for l in 1..=cfg.hidden_layers {
        let w = match widths.last() {
            None => cfg.units_per_layer,
            Some(_) if !cfg.decreasing_units => cfg.units_per_layer,
            Some(&prev) if cfg.halving => prev / 2,
            Some(&prev) => prev.checked_shr(l as u32).unwrap_or(0),
        };
        widths.push(w.max(1));
    }
    widths
}

/// Fully connected layer; `weights[j * outputs + o]` connects input `j` to output `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn glorot(inputs: usize, outputs: usize, rng: &mut seed::Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.random_range(-limit..=limit))
                .collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn zeros_like(&self) -> Self {
        Dense {
            inputs: self.inputs,
            outputs: self.outputs,
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.outputs],
        }
    }

    fn forward_sparse(&self, x: &SparseInput, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (&j, &a) in x.idx.iter().zip(&x.val) {
            let row = &self.weights[j * self.outputs..(j + 1) * self.outputs];
            for (z, w) in out.iter_mut().zip(row) {
                *z += a * w;
            }
        }
    }

    fn copy_from(&mut self, other: &Dense) {
        self.weights.copy_from_slice(&other.weights);
        self.bias.copy_from_slice(&other.bias);
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (j, &a) in x.iter().enumerate() {
            if a != 0.0 {
                let row = &self.weights[j * self.outputs..(j + 1) * self.outputs];
                for (z, w) in out.iter_mut().zip(row) {
                    *z += a * w;
                }
            }
        }
    }
}

/// Non-zero entries of an input vector.
struct SparseInput {
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseInput {
    fn new(x: &[f64]) -> Self {
        let (idx, val) = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .unzip();
        SparseInput { idx, val }
    }
}

/// Non-zeros of a batch grouped by input coordinate, so every first-layer
/// weight row is read once per pass instead of once per example. Within a
/// column, examples are in batch order, which keeps every sum in the same
/// order as an example-by-example pass.
struct Batch {
    n: usize,
    cols: Vec<usize>,
    starts: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl Batch {
    fn new(xs: &[&SparseInput], input_dim: usize) -> Self {
        let mut counts = vec![0usize; input_dim + 1];
        for x in xs {
            for &j in &x.idx {
                counts[j + 1] += 1;
            }
        }
        for j in 0..input_dim {
            counts[j + 1] += counts[j];
        }
        let mut fill = counts.clone();
        let mut entries = vec![(0, 0.0); counts[input_dim]];
        for (i, x) in xs.iter().enumerate() {
            for (&j, &a) in x.idx.iter().zip(&x.val) {
                entries[fill[j]] = (i, a);
                fill[j] += 1;
            }
        }
        let cols: Vec<usize> = (0..input_dim)
            .filter(|&j| counts[j + 1] > counts[j])
            .collect();
        let mut starts: Vec<usize> = cols.iter().map(|&j| counts[j]).collect();
        starts.push(entries.len());
        Batch {
            n: xs.len(),
            cols,
            starts,
            entries,
        }
    }

    fn column(&self, c: usize) -> &[(usize, f64)] {
        &self.entries[self.starts[c]..self.starts[c + 1]]
    }

    /// Calls `f(j, g_j)` for every touched row `j` of the first-layer
    /// weight gradient, where `g_j = sum_i x_ij * deltas[i]`.
    fn for_each_row_grad(
        &self,
        deltas: &[Vec<f64>],
        outputs: usize,
        mut f: impl FnMut(usize, &[f64]),
    ) {
        let mut g = vec![0.0; outputs];
        for (c, &j) in self.cols.iter().enumerate() {
            g.fill(0.0);
            for &(i, a) in self.column(c) {
                for (gv, d) in g.iter_mut().zip(&deltas[i]) {
                    *gv += a * d;
                }
            }
            f(j, &g);
        }
    }
}

/// Batch gradient. The first layer's weight gradient stays implicit: it is
/// rebuilt row by row from the batch and the per-example first-layer deltas.
struct Gradient {
    deltas: Vec<Vec<f64>>,
    first_bias: Vec<f64>,
    /// Layers after the first; `rest[0]` belongs to layer 1.
    rest: Vec<Dense>,
    /// L1 term that lands on the first layer when it is also the output layer.
    first_l1: f64,
}

impl Gradient {
    fn zeros(layers: &[Dense]) -> Self {
        Gradient {
            deltas: Vec::new(),
            first_bias: vec![0.0; layers[0].outputs],
            rest: layers[1..].iter().map(Dense::zeros_like).collect(),
            first_l1: 0.0,
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn target(label: Label) -> [f64; 2] {
    match label {
        Label::Normal => [1.0, 0.0],
        Label::Problematic => [0.0, 1.0],
    }
}

/// Squared error against the one-hot target, halved: `((p0-t0)^2 + (p1-t1)^2) / 2`.
pub fn mse(probs: [f64; 2], label: Label) -> f64 {
    let t = target(label);
    ((probs[0] - t[0]).powi(2) + (probs[1] - t[1]).powi(2)) / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    /// Hidden layers followed by the two-unit output layer.
    pub layers: Vec<Dense>,
    /// Epoch whose starting weights were kept (`max_epochs` means after the last update).
    pub best_epoch: usize,
    pub best_loss: f64,
    /// Training loss of the weights at the start of every epoch, plus the final weights.
    pub epoch_losses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: MlpConfig,
    widths: Vec<usize>,
    best_epoch: usize,
    // NaN until trained; JSON has no NaN.
    best_loss: Option<f64>,
    epoch_losses: Vec<f64>,
}

impl MlpModel {
    /// Freshly initialized network with the given hidden widths.
    pub fn new(config: MlpConfig, hidden: &[usize]) -> Self {
        let mut rng = seed::rng(seed::stage(config.seed, "mlp-init"));
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = config.input_dim;
        for &w in hidden.iter().chain(std::iter::once(&2)) {
            layers.push(Dense::glorot(fan_in, w, &mut rng));
            fan_in = w;
        }
        MlpModel {
            config,
            layers,
            best_epoch: 0,
            best_loss: f64::NAN,
            epoch_losses: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    /// Widths of every layer, output included.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.outputs).collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.input_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            })
        }
    }

    /// Post-activation outputs of every layer given the first layer's
    /// pre-activation; the last entry is the softmax.
    fn activations_from(&self, mut z: Vec<f64>) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for i in 0..self.layers.len() {
            if i > 0 {
                let mut next = Vec::with_capacity(self.layers[i].outputs);
                self.layers[i].forward(&acts[i - 1], &mut next);
                z = next;
            }
            if i == last {
                z = softmax(&z);
            } else {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(std::mem::take(&mut z));
        }
        acts
    }

    fn activations(&self, x: &SparseInput) -> Vec<Vec<f64>> {
        let mut z = Vec::with_capacity(self.layers[0].outputs);
        self.layers[0].forward_sparse(x, &mut z);
        self.activations_from(z)
    }

    /// First-layer pre-activations of every example in the batch.
    fn first_layer_batch(&self, batch: &Batch) -> Vec<Vec<f64>> {
        let first = &self.layers[0];
        let mut zs = vec![first.bias.clone(); batch.n];
        for (c, &j) in batch.cols.iter().enumerate() {
            let row = &first.weights[j * first.outputs..(j + 1) * first.outputs];
            for &(i, a) in batch.column(c) {
                for (z, w) in zs[i].iter_mut().zip(row) {
                    *z += a * w;
                }
            }
        }
        zs
    }

    /// `(p_normal, p_problematic)`.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; 2]> {
        self.check_input(x)?;
        let acts = self.activations(&SparseInput::new(x));
        let p = acts.last().expect("output layer");
        Ok([p[0], p[1]])
    }

    pub fn l1_penalty(&self, lambda: f64) -> f64 {
        if lambda > 0.0 {
            lambda
                * self
                    .layers
                    .last()
                    .unwrap()
                    .weights
                    .iter()
                    .map(|w| w.abs())
                    .sum::<f64>()
        } else {
            0.0
        }
    }

    /// Single-example loss: MSE plus the output-layer L1 term.
    pub fn loss(&self, probs: [f64; 2], label: Label, l1_lambda: f64) -> f64 {
        mse(probs, label) + self.l1_penalty(l1_lambda)
    }

    /// Mean MSE over the examples plus the L1 term.
    pub fn dataset_loss(&self, xs: &[Vec<f64>], ys: &[Label], l1_lambda: f64) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            total += mse(self.forward(x)?, y);
        }
        Ok(total / xs.len() as f64 + self.l1_penalty(l1_lambda))
    }

    /// Fills `grads` for the batch and returns the batch loss.
    fn backprop(&self, batch: &Batch, ys: &[Label], l1_lambda: f64, grads: &mut Gradient) -> f64 {
        let scale = 1.0 / batch.n as f64;
        let mut total = 0.0;
        grads.deltas.clear();
        for (z0, &y) in self.first_layer_batch(batch).into_iter().zip(ys) {
            let acts = self.activations_from(z0);
            let p = acts.last().unwrap();
            let t = target(y);
            total += mse([p[0], p[1]], y);
            // d MSE / d logits through the softmax Jacobian.
            let err = [p[0] - t[0], p[1] - t[1]];
            let dot = err[0] * p[0] + err[1] * p[1];
            let mut delta: Vec<f64> = (0..2).map(|j| p[j] * (err[j] - dot) * scale).collect();
            for i in (1..self.layers.len()).rev() {
                let layer = &self.layers[i];
                let input = &acts[i - 1];
                let g = &mut grads.rest[i - 1];
                for (gb, d) in g.bias.iter_mut().zip(&delta) {
                    *gb += d;
                }
                for (j, &a) in input.iter().enumerate() {
                    if a != 0.0 {
                        let row = &mut g.weights[j * layer.outputs..(j + 1) * layer.outputs];
                        for (gw, d) in row.iter_mut().zip(&delta) {
                            *gw += a * d;
                        }
                    }
                }
                delta = (0..layer.inputs)
                    .map(|j| {
                        if input[j] > 0.0 {
                            let row = &layer.weights[j * layer.outputs..(j + 1) * layer.outputs];
                            row.iter().zip(&delta).map(|(w, d)| w * d).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
            for (gb, d) in grads.first_bias.iter_mut().zip(&delta) {
                *gb += d;
            }
            grads.deltas.push(delta);
        }
        grads.first_l1 = 0.0;
        if l1_lambda > 0.0 {
            if let Some(g) = grads.rest.last_mut() {
                let out = self.layers.last().unwrap();
                for (gw, w) in g.weights.iter_mut().zip(&out.weights) {
                    *gw += l1_lambda * sign(*w);
                }
            } else {
                grads.first_l1 = l1_lambda;
            }
        }
        total * scale + self.l1_penalty(l1_lambda)
    }

    /// Dense first-layer weight gradient.
    fn first_weight_grad(&self, batch: &Batch, grads: &Gradient) -> Vec<f64> {
        let first = &self.layers[0];
        let mut g = vec![0.0; first.weights.len()];
        let outputs = first.outputs;
        batch.for_each_row_grad(&grads.deltas, outputs, |j, row| {
            g[j * outputs..(j + 1) * outputs].copy_from_slice(row);
        });
        if grads.first_l1 > 0.0 {
            for (gw, w) in g.iter_mut().zip(&first.weights) {
                *gw += grads.first_l1 * sign(*w);
            }
        }
        g
    }

    /// Flat parameter vector: per layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let n: usize = self
            .layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum();
        if params.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: params.len(),
            });
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    /// Batch loss and its gradient in [`MlpModel::params`] order.
    pub fn loss_and_gradient(
        &self,
        xs: &[Vec<f64>],
        ys: &[Label],
        l1_lambda: f64,
    ) -> Result<(f64, Vec<f64>)> {
        for x in xs {
            self.check_input(x)?;
        }
        let sparse: Vec<SparseInput> = xs.iter().map(|x| SparseInput::new(x)).collect();
        let refs: Vec<&SparseInput> = sparse.iter().collect();
        let batch = Batch::new(&refs, self.input_dim());
        let mut grads = Gradient::zeros(&self.layers);
        let loss = self.backprop(&batch, ys, l1_lambda, &mut grads);
        let mut flat = self.first_weight_grad(&batch, &grads);
        flat.extend_from_slice(&grads.first_bias);
        for l in &grads.rest {
            flat.extend_from_slice(&l.weights);
            flat.extend_from_slice(&l.bias);
        }
        Ok((loss, flat))
    }

    /// Applies `-lr * grads` and clears `grads` for the next batch.
    fn step(&mut self, batch: &Batch, grads: &mut Gradient, lr: f64) {
        if grads.first_l1 > 0.0 {
            let g = self.first_weight_grad(batch, grads);
            for (w, d) in self.layers[0].weights.iter_mut().zip(&g) {
                *w -= lr * d;
            }
        } else {
            let first = &mut self.layers[0];
            let outputs = first.outputs;
            batch.for_each_row_grad(&grads.deltas, outputs, |j, row| {
                for (w, d) in first.weights[j * outputs..(j + 1) * outputs]
                    .iter_mut()
                    .zip(row)
                {
                    *w -= lr * d;
                }
            });
        }
        for (b, d) in self.layers[0].bias.iter_mut().zip(&mut grads.first_bias) {
            *b -= lr * *d;
            *d = 0.0;
        }
        for (l, g) in self.layers[1..].iter_mut().zip(&mut grads.rest) {
            for (w, d) in l.weights.iter_mut().zip(&mut g.weights) {
                *w -= lr * *d;
                *d = 0.0;
            }
            for (b, d) in l.bias.iter_mut().zip(&mut g.bias) {
                *b -= lr * *d;
                *d = 0.0;
            }
        }
        grads.deltas.clear();
    }

    /// `(label, p_problematic)`; problematic iff the score exceeds `threshold`.
    pub fn classify(&self, x: &[f64], threshold: f64) -> Result<(Label, f64)> {
        let score = self.forward(x)?[1];
        let label = if score > threshold {
            Label::Problematic
        } else {
            Label::Normal
        };
        Ok((label, score))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = Header {
            config: self.config.clone(),
            widths: self.widths(),
            best_epoch: self.best_epoch,
            best_loss: Some(self.best_loss).filter(|l| l.is_finite()),
            epoch_losses: self.epoch_losses.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let fmt = |m: &str| Error::Format(m.to_string());
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(fmt("not a model file"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(io)?;
        if u32::from_le_bytes(b4) != FORMAT_VERSION {
            return Err(fmt("unsupported model version"));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(io)?;
        let mut json = vec![0u8; u64::from_le_bytes(b8) as usize];
        r.read_exact(&mut json).map_err(io)?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| fmt(&e.to_string()))?;
        if header.widths.last() != Some(&2) {
            return Err(fmt("output layer must have two units"));
        }
        let mut layers = Vec::with_capacity(header.widths.len());
        let mut fan_in = header.config.input_dim;
        for &out in &header.widths {
            let mut read = |n: usize| -> Result<Vec<f64>> {
                let mut buf = vec![0u8; n * 8];
                r.read_exact(&mut buf).map_err(io)?;
                Ok(buf
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect())
            };
            let weights = read(fan_in * out)?;
            let bias = read(out)?;
            layers.push(Dense {
                inputs: fan_in,
                outputs: out,
                weights,
                bias,
            });
            fan_in = out;
        }
        Ok(MlpModel {
            config: header.config,
            layers,
            best_epoch: header.best_epoch,
            best_loss: header.best_loss.unwrap_or(f64::NAN),
            epoch_losses: header.epoch_losses,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient descent with best-state selection by training loss.
///
/// The loss of the current weights is recorded before every update; the
/// returned model carries the weights with the lowest recorded loss.
pub fn train(cfg: &MlpConfig, xs: &[Vec<f64>], ys: &[Label]) -> Result<MlpModel> {
    cfg.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Empty(
            "at least two training examples are required".into(),
        ));
    }
    if !(ys.contains(&Label::Normal) && ys.contains(&Label::Problematic)) {
        return Err(Error::SingleClass);
    }
    let mut model = MlpModel::new(cfg.clone(), &layer_widths(cfg));
    for x in xs {
        model.check_input(x)?;
    }
    let n = xs.len();
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed::stage(cfg.seed, "mlp-batches"));
    let sparse: Vec<SparseInput> = xs.iter().map(|x| SparseInput::new(x)).collect();
    let all: Vec<&SparseInput> = sparse.iter().collect();
    let full = Batch::new(&all, cfg.input_dim);
    let mut grads = Gradient::zeros(&model.layers);

    let mut losses = Vec::with_capacity(cfg.max_epochs + 1);
    let mut best_layers = model.layers.clone();
    let mut best: Option<(f64, usize)> = None;
    let mut record =
        |loss: f64, epoch: usize, layers: &[Dense], losses: &mut Vec<f64>| -> Result<()> {
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            losses.push(loss);
            if best.is_none_or(|(b, _)| loss < b) {
                best = Some((loss, epoch));
                for (dst, src) in best_layers.iter_mut().zip(layers) {
                    dst.copy_from(src);
                }
            }
            Ok(())
        };

    for epoch in 0..cfg.max_epochs {
        if batch == n {
            let loss = model.backprop(&full, ys, cfg.l1_lambda, &mut grads);
            record(loss, epoch, &model.layers, &mut losses)?;
            model.step(&full, &mut grads, cfg.learning_rate);
        } else {
            let loss = model.dataset_loss(xs, ys, cfg.l1_lambda)?;
            record(loss, epoch, &model.layers, &mut losses)?;
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let bx: Vec<&SparseInput> = chunk.iter().map(|&i| all[i]).collect();
                let by: Vec<Label> = chunk.iter().map(|&i| ys[i]).collect();
                let batch = Batch::new(&bx, cfg.input_dim);
                model.backprop(&batch, &by, cfg.l1_lambda, &mut grads);
                model.step(&batch, &mut grads, cfg.learning_rate);
            }
        }
    }
    let final_loss = model.dataset_loss(xs, ys, cfg.l1_lambda)?;
    record(final_loss, cfg.max_epochs, &model.layers, &mut losses)?;

    let (best_loss, best_epoch) = best.expect("at least one recorded epoch");
    model.layers = best_layers;
    model.best_loss = best_loss;
    model.best_epoch = best_epoch;
    model.epoch_losses = losses;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(units: usize, layers: usize, decreasing: bool) -> MlpConfig {
        MlpConfig {
            units_per_layer: units,
            hidden_layers: layers,
            decreasing_units: decreasing,
            ..MlpConfig::default()
        }
    }

    #[test]
    fn widths_literal_halving_and_flat() {
        assert_eq!(layer_widths(&cfg(100, 4, true)), vec![100, 25, 3, 1]);
        assert_eq!(layer_widths(&cfg(100, 4, false)), vec![100; 4]);
        assert!(layer_widths(&cfg(100, 0, true)).is_empty());
        let halving = MlpConfig {
            halving: true,
            ..cfg(100, 4, true)
        };
        assert_eq!(layer_widths(&halving), vec![100, 50, 25, 12]);
        assert_eq!(layer_widths(&cfg(100, 70, true)).last(), Some(&1));
    }

    #[test]
    fn softmax_is_stable() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        for logits in [[1e4, -1e4], [-1e4, 1e4], [1e4, 1e4 - 1.0], [-1e4, -1e4]] {
            let p = softmax(&logits);
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let mut m = MlpModel::new(
            MlpConfig {
                input_dim: 5,
                ..cfg(4, 2, false)
            },
            &[4, 4],
        );
        let zeros = vec![0.0; m.params().len()];
        m.set_params(&zeros).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.0, 1.0]).unwrap(), [0.5, 0.5]);
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn relu_blocks_negative_preactivation() {
        let mut m = MlpModel::new(
            MlpConfig {
                input_dim: 1,
                ..cfg(1, 1, false)
            },
            &[1],
        );
        // hidden: z = -x; output logits (h, 0)
        m.set_params(&[-1.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.forward(&[3.0]).unwrap(), [0.5, 0.5]);
        let p = m.forward(&[-3.0]).unwrap();
        assert!(p[0] > 0.5);
    }

    #[test]
    fn loss_values() {
        assert_eq!(mse([1.0, 0.0], Label::Normal), 0.0);
        assert_eq!(mse([0.5, 0.5], Label::Normal), 0.25);
        assert_eq!(mse([0.5, 0.5], Label::Problematic), 0.25);
        let m = MlpModel::new(
            MlpConfig {
                input_dim: 3,
                ..cfg(2, 0, false)
            },
            &[],
        );
        assert_eq!(m.loss([0.5, 0.5], Label::Normal, 0.0), 0.25);
        let l1: f64 = m.layers[0].weights.iter().map(|w| w.abs()).sum();
        assert!((m.loss([0.5, 0.5], Label::Normal, 0.1) - (0.25 + 0.1 * l1)).abs() < 1e-12);
    }

    #[test]
    fn classify_threshold_is_strict() {
        let mut m = MlpModel::new(
            MlpConfig {
                input_dim: 1,
                ..cfg(1, 0, false)
            },
            &[],
        );
        m.set_params(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.classify(&[1.0], 0.5).unwrap(), (Label::Normal, 0.5));
        // logits (0, ln 9) -> p_problematic = 0.9
        m.set_params(&[0.0, 0.0, 0.0, 9f64.ln()]).unwrap();
        let (label, score) = m.classify(&[1.0], 0.5).unwrap();
        assert_eq!(label, Label::Problematic);
        assert!((score - 0.9).abs() < 1e-12);
    }

    fn separable_toy() -> (Vec<Vec<f64>>, Vec<Label>) {
        let xs: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let mut x = vec![0.0; 12];
                x[0] = (i % 2) as f64;
                x[1 + i] = 1.0;
                x
            })
            .collect();
        let ys = (0..8)
            .map(|i| {
                if i % 2 == 1 {
                    Label::Problematic
                } else {
                    Label::Normal
                }
            })
            .collect();
        (xs, ys)
    }

    #[test]
    fn learns_separable_toy() {
        let (xs, ys) = separable_toy();
        let c = MlpConfig {
            input_dim: 12,
            learning_rate: 0.5,
            seed: 3,
            ..cfg(8, 1, false)
        };
        let m = train(&c, &xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(m.classify(x, 0.5).unwrap().0, *y);
        }
        assert!(m.best_loss <= m.epoch_losses[0]);
        let min = m.epoch_losses.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(m.best_loss, min);
        assert_eq!(m.dataset_loss(&xs, &ys, 0.0).unwrap(), m.best_loss);
    }

    #[test]
    fn training_is_deterministic_and_minibatch_works() {
        let (xs, ys) = separable_toy();
        let c = MlpConfig {
            input_dim: 12,
            learning_rate: 0.1,
            seed: 9,
            batch_size: Some(3),
            l1_lambda: DEFAULT_L1_LAMBDA,
            ..cfg(6, 3, true)
        };
        let a = train(&c, &xs, &ys).unwrap();
        let b = train(&c, &xs, &ys).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.epoch_losses.len(), c.max_epochs + 1);
    }

    #[test]
    fn training_errors() {
        let (xs, _) = separable_toy();
        let c = MlpConfig {
            input_dim: 12,
            ..cfg(4, 1, false)
        };
        assert!(matches!(
            train(&c, &xs, &vec![Label::Normal; 8]),
            Err(Error::SingleClass)
        ));
        let huge = MlpConfig {
            learning_rate: 1e300,
            ..c.clone()
        };
        let (xs, ys) = separable_toy();
        assert!(matches!(
            train(&huge, &xs, &ys),
            Err(Error::NonFiniteLoss(_))
        ));
        let bad = MlpConfig { input_dim: 5, ..c };
        assert!(train(&bad, &xs, &ys).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let m = MlpModel::new(
            MlpConfig {
                input_dim: 7,
                ..cfg(5, 3, true)
            },
            &[5, 1, 1],
        );
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = MlpModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.widths(), m.widths());
        assert!(MlpModel::read_from(&b"garbage!"[..]).is_err());
    }
}
