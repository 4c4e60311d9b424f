//! From-scratch fully-connected classifier: the target model under
//! attack. Forward pass, mini-batch cross-entropy training (SGD/Adam),
//! and a text-based persistence format.
//!
//! Everything is f64 and deterministic under the config seed. Batch
//! gradients are accumulated over fixed-size chunks that are summed in
//! index order, so parallel and sequential runs produce identical
//! weights.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Samples per parallel gradient chunk. Fixed (not thread-count
/// dependent) so the summation order never changes.
const GRAD_CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::Domain("hidden layer list must be non-empty".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::Domain("all layer widths must be at least 1".into()));
        }
        Ok(())
    }

    /// (fan_in, fan_out) per affine layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(i, o)| i * o + o)
            .sum()
    }
}

/// One affine layer: `weights` is row-major, `out_dim` rows of
/// `in_dim` columns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs_run: usize,
    pub final_train_accuracy: f64,
    pub final_test_accuracy: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Keep training at least this many epochs even after the accuracy
    /// target is met — the lever for deliberate overfitting.
    pub min_epochs: usize,
    /// Early stop once train accuracy reaches this.
    pub target_train_accuracy: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            min_epochs: 0,
            target_train_accuracy: 0.99,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpModel {
    pub architecture: MlpArchitecture,
    pub layers: Vec<Layer>,
    pub train_meta: TrainMeta,
}

impl MlpModel {
    /// Fan-in scaled uniform init, seeded.
    pub fn init(architecture: MlpArchitecture, seed: u64) -> Result<Self> {
        architecture.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let layers = architecture
            .layer_dims()
            .iter()
            .map(|&(fan_in, fan_out)| {
                let bound = (6.0 / fan_in as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                Layer {
                    weights,
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(MlpModel {
            architecture,
            layers,
            train_meta: TrainMeta {
                seed,
                ..Default::default()
            },
        })
    }

    /// Softmax confidence vector for a bit-packed input.
    pub fn forward(&self, x: &BitVector) -> Result<Vec<f64>> {
        if x.width() != self.architecture.input_dim {
            return Err(Error::Schema(format!(
                "input width {} does not match model input dim {}",
                x.width(),
                self.architecture.input_dim
            )));
        }
        Ok(self.forward_dense(&x.to_dense()))
    }

    /// Forward pass on a dense input (assumed the right width).
    pub fn forward_dense(&self, x: &[f64]) -> Vec<f64> {
        let logits = self.logits(x);
        softmax(&logits)
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &a);
            if l < last {
                apply_activation(self.architecture.activation, &mut z);
            }
            a = z;
        }
        a
    }

    pub fn max_confidence(&self, x: &BitVector) -> Result<f64> {
        let y = self.forward(x)?;
        Ok(y.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Max confidence for a batch of inputs, parallel over inputs.
    pub fn max_confidences(&self, xs: &[BitVector]) -> Result<Vec<f64>> {
        for x in xs {
            if x.width() != self.architecture.input_dim {
                return Err(Error::Schema(format!(
                    "input width {} does not match model input dim {}",
                    x.width(),
                    self.architecture.input_dim
                )));
            }
        }
        Ok(exec::map_slice(xs, |x| {
            self.forward_dense(&x.to_dense())
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        }))
    }

    /// Sequential batch scoring, kept for the bench suite.
    pub fn max_confidences_seq(&self, xs: &[BitVector]) -> Vec<f64> {
        exec::seq::map_slice(xs, |x| {
            self.forward_dense(&x.to_dense())
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        })
    }

    pub fn predict(&self, x: &BitVector) -> Result<usize> {
        let y = self.forward(x)?;
        Ok(argmax(&y))
    }

    /// Fraction of records whose argmax prediction matches the label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let labels = data
            .labels()
            .ok_or_else(|| Error::Domain("accuracy requires labels".into()))?;
        let hits: Vec<bool> = exec::map_indexed(data.len(), |i| {
            let y = self.forward_dense(&data.record(i).to_dense());
            argmax(&y) == labels[i]
        });
        Ok(hits.iter().filter(|&&h| h).count() as f64 / data.len() as f64)
    }

    /// All parameters flattened: per layer, row-major weights then
    /// biases. The order matches `set_params` and `grad_on`.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.architecture.num_params());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.architecture.num_params() {
            return Err(Error::Schema(format!(
                "expected {} parameters, got {}",
                self.architecture.num_params(),
                params.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    /// Mean cross-entropy over a labeled batch of dense inputs.
    pub fn loss_on(&self, inputs: &[Vec<f64>], labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for (x, &label) in inputs.iter().zip(labels) {
            let y = self.forward_dense(x);
            total += -(y[label].max(1e-300)).ln();
        }
        total / inputs.len() as f64
    }

    /// Analytic gradient of `loss_on`, flattened in `flatten_params`
    /// order.
    pub fn grad_on(&self, inputs: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
        let (_, mut grad) = self.batch_loss_and_grad(inputs, labels);
        let scale = 1.0 / inputs.len() as f64;
        for g in grad.iter_mut() {
            *g *= scale;
        }
        grad
    }

    /// Summed (not averaged) loss and gradient over a batch. Parallel
    /// over fixed-size chunks, reduced in order.
    fn batch_loss_and_grad(&self, inputs: &[Vec<f64>], labels: &[usize]) -> (f64, Vec<f64>) {
        let n_params = self.architecture.num_params();
        let chunks: Vec<(usize, usize)> = (0..inputs.len())
            .step_by(GRAD_CHUNK)
            .map(|s| (s, (s + GRAD_CHUNK).min(inputs.len())))
            .collect();
        let partials: Vec<(f64, Vec<f64>)> = exec::map_slice(&chunks, |&(s, e)| {
            let mut grad = vec![0.0; n_params];
            let mut loss = 0.0;
            for i in s..e {
                loss += self.accumulate_sample_grad(&inputs[i], labels[i], &mut grad);
            }
            (loss, grad)
        });
        let mut grad = vec![0.0; n_params];
        let mut loss = 0.0;
        for (l, g) in partials {
            loss += l;
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc += v;
            }
        }
        (loss, grad)
    }

    /// Backprop for one sample; adds the gradient into `grad` and
    /// returns the sample's cross-entropy loss.
    fn accumulate_sample_grad(&self, x: &[f64], label: usize, grad: &mut [f64]) -> f64 {
        let n_layers = self.layers.len();
        // forward, keeping post-activation values per layer
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, activations.last().unwrap());
            if l < n_layers - 1 {
                apply_activation(self.architecture.activation, &mut z);
            }
            activations.push(z);
        }
        let y = softmax(activations.last().unwrap());
        let loss = -(y[label].max(1e-300)).ln();

        // softmax + cross-entropy: delta at the output is y - onehot
        let mut delta: Vec<f64> = y;
        delta[label] -= 1.0;

        // per-layer parameter offsets in the flattened order
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.weights.len() + layer.biases.len();
        }

        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let input = &activations[l];
            let in_dim = input.len();
            let base = offsets[l];
            for (r, &d) in delta.iter().enumerate() {
                let row = base + r * in_dim;
                for (c, &a) in input.iter().enumerate() {
                    grad[row + c] += d * a;
                }
            }
            let bias_base = base + layer.weights.len();
            for (r, &d) in delta.iter().enumerate() {
                grad[bias_base + r] += d;
            }
            if l > 0 {
                // delta_prev = W^T delta, gated by the activation
                // derivative at the previous layer's output
                let mut prev = vec![0.0; in_dim];
                for (r, &d) in delta.iter().enumerate() {
                    let row = r * in_dim;
                    for (c, p) in prev.iter_mut().enumerate() {
                        *p += layer.weights[row + c] * d;
                    }
                }
                match self.architecture.activation {
                    Activation::Relu => {
                        for (p, &a) in prev.iter_mut().zip(input) {
                            if a <= 0.0 {
                                *p = 0.0;
                            }
                        }
                    }
                    Activation::Tanh => {
                        for (p, &a) in prev.iter_mut().zip(input) {
                            *p *= 1.0 - a * a;
                        }
                    }
                }
                delta = prev;
            }
        }
        loss
    }

    /// Persist as a self-describing JSON document.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            architecture: self.architecture.clone(),
            layers: self.layers.clone(),
            train_meta: self.train_meta.clone(),
        };
        let text = serde_json::to_string(&file)
            .map_err(|e| Error::Format(format!("model serialization failed: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("malformed model file: {e}")))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "format_version mismatch: expected {MODEL_FORMAT_VERSION}, found {}",
                file.format_version
            )));
        }
        let model = MlpModel {
            architecture: file.architecture,
            layers: file.layers,
            train_meta: file.train_meta,
        };
        // shape check against the declared architecture
        let dims = model.architecture.layer_dims();
        if model.layers.len() != dims.len() {
            return Err(Error::Format(format!(
                "layer count {} does not match architecture ({} affine layers)",
                model.layers.len(),
                dims.len()
            )));
        }
        for (l, ((fan_in, fan_out), layer)) in dims.iter().zip(&model.layers).enumerate() {
            if layer.weights.len() != fan_in * fan_out || layer.biases.len() != *fan_out {
                return Err(Error::Format(format!(
                    "layer {l} shape mismatch: expected {fan_in}x{fan_out}"
                )));
            }
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    architecture: MlpArchitecture,
    layers: Vec<Layer>,
    train_meta: TrainMeta,
}

fn affine(layer: &Layer, input: &[f64]) -> Vec<f64> {
    let in_dim = input.len();
    let out_dim = layer.biases.len();
    let mut out = layer.biases.clone();
    for r in 0..out_dim {
        let row = &layer.weights[r * in_dim..(r + 1) * in_dim];
        let mut acc = 0.0;
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        out[r] += acc;
    }
    out
}

fn apply_activation(act: Activation, z: &mut [f64]) {
    match act {
        Activation::Relu => {
            for v in z.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Activation::Tanh => {
            for v in z.iter_mut() {
                *v = v.tanh();
            }
        }
    }
}

/// Numerically stable softmax.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

fn argmax(y: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in y.iter().enumerate().skip(1) {
        if v > y[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch training on a labeled dataset. Evaluates test accuracy for
/// the train_meta when a test set is supplied.
pub fn train(
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    arch: &MlpArchitecture,
    cfg: &TrainConfig,
) -> Result<MlpModel> {
    let labels = train_set
        .labels()
        .ok_or_else(|| Error::Domain("training requires labels".into()))?
        .to_vec();
    if train_set.width() != arch.input_dim {
        return Err(Error::Schema(format!(
            "dataset width {} does not match input dim {}",
            train_set.width(),
            arch.input_dim
        )));
    }
    if labels.iter().any(|&l| l >= arch.output_dim) {
        return Err(Error::Schema("label out of range for output dim".into()));
    }
    if cfg.batch_size == 0 || cfg.batch_size > train_set.len() {
        return Err(Error::Domain(format!(
            "batch_size {} out of range for {} training records",
            cfg.batch_size,
            train_set.len()
        )));
    }

    let mut model = MlpModel::init(arch.clone(), cfg.seed)?;
    let inputs: Vec<Vec<f64>> = train_set.records().iter().map(|r| r.to_dense()).collect();
    let n_params = arch.num_params();

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..inputs.len()).collect();

    // Adam state
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut step = 0u64;
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);

    let mut params = model.flatten_params();
    let mut epochs_run = 0;
    let mut train_acc = 0.0;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let batch_inputs: Vec<Vec<f64>> = batch.iter().map(|&i| inputs[i].clone()).collect();
            let batch_labels: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (loss_sum, grad_sum) = model.batch_loss_and_grad(&batch_inputs, &batch_labels);
            let batch_n = batch.len() as f64;
            if !loss_sum.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: loss_sum / batch_n,
                });
            }
            step += 1;
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, &g) in params.iter_mut().zip(&grad_sum) {
                        *p -= cfg.learning_rate * g / batch_n;
                    }
                }
                Optimizer::Adam => {
                    let bc1 = 1.0 - beta1.powi(step as i32);
                    let bc2 = 1.0 - beta2.powi(step as i32);
                    for i in 0..n_params {
                        let g = grad_sum[i] / batch_n;
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            model.set_params(&params)?;
        }
        epochs_run = epoch + 1;
        train_acc = model.accuracy(train_set)?;
        if epochs_run >= cfg.min_epochs && train_acc >= cfg.target_train_accuracy {
            break;
        }
    }

    let test_acc = match test_set {
        Some(t) => Some(model.accuracy(t)?),
        None => None,
    };
    model.train_meta = TrainMeta {
        epochs_run,
        final_train_accuracy: train_acc,
        final_test_accuracy: test_acc,
        seed: cfg.seed,
    };
    Ok(model)
}
