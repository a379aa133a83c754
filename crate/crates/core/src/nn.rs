//! Feed-forward network over normalized `(h, s, v)`.
//!
//! Three inputs, ReLU hidden layers, and a two-way softmax output
//! `(skin, non-skin)`, trained on categorical cross-entropy with Adam.
//! All parameters live in one flat vector; layer `i` stores its weights
//! row-major (`outputs x inputs`) followed by its biases, so gradients and
//! optimizer moments share the same layout.

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;

use crate::classifiers::{ClassProbabilities, PixelClassifier};
use crate::colorspace::{normalize_hsv, rgb_to_hsv, RgbPixel};
use crate::dataset::{HsvSample, Label};
use crate::error::{Error, Result};
use crate::rng::{self, SplitMix64};

pub const INPUT_DIM: usize = 3;
pub const OUTPUT_DIM: usize = 2;

/// Lower clamp applied to the true-class probability inside the loss.
pub const LOSS_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpArchitecture {
    pub hidden: Vec<usize>,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self {
            hidden: vec![32, 16, 8],
        }
    }
}

impl MlpArchitecture {
    pub fn new(hidden: Vec<usize>) -> Result<Self> {
        let arch = Self { hidden };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::Config("network needs at least one hidden layer".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be at least 1".into()));
        }
        Ok(())
    }

    /// Input, hidden and output widths in order.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(INPUT_DIM);
        w.extend(&self.hidden);
        w.push(OUTPUT_DIM);
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Borrowed view of one dense layer.
pub struct LayerView<'a> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Activations recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[i]` the post-ReLU output
    /// of hidden layer `i`.
    pub activations: Vec<Vec<f64>>,
    /// Pre-activation values of every layer, the last being the logits.
    pub pre_activations: Vec<Vec<f64>>,
    pub probabilities: ClassProbabilities,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn cross_entropy(p: ClassProbabilities, label: Label) -> f64 {
    -p.probability(label).clamp(LOSS_FLOOR, 1.0).ln()
}

fn one_hot(label: Label) -> [f64; 2] {
    match label {
        Label::Skin => [1.0, 0.0],
        Label::NonSkin => [0.0, 1.0],
    }
}

impl MlpModel {
    pub fn zeros(arch: &MlpArchitecture) -> Result<Self> {
        arch.validate()?;
        let widths = arch.widths();
        let params = vec![0.0; param_count(&widths)];
        Ok(Self { widths, params })
    }

    /// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(arch: &MlpArchitecture, rng: &mut SplitMix64) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        let mut offset = 0;
        for w in model.widths.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            for p in &mut model.params[offset..offset + fan_in * fan_out] {
                *p = dist.sample(rng);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(model)
    }

    pub fn from_params(arch: &MlpArchitecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let widths = arch.widths();
        let expected = param_count(&widths);
        if params.len() != expected {
            return Err(Error::Config(format!(
                "expected {expected} parameters for widths {widths:?}, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("network parameters must be finite".into()));
        }
        Ok(Self { widths, params })
    }

    pub fn architecture(&self) -> MlpArchitecture {
        MlpArchitecture {
            hidden: self.widths[1..self.widths.len() - 1].to_vec(),
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn layer(&self, index: usize) -> LayerView<'_> {
        let offset: usize = self.widths[..=index].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (inputs, outputs) = (self.widths[index], self.widths[index + 1]);
        let weights = &self.params[offset..offset + inputs * outputs];
        let bias = &self.params[offset + inputs * outputs..offset + inputs * outputs + outputs];
        LayerView {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    pub fn forward_cached(&self, x: [f64; 3]) -> ForwardCache {
        let layers = self.layer_count();
        let mut activations = vec![x.to_vec()];
        let mut pre_activations = Vec::with_capacity(layers);
        for i in 0..layers {
            let layer = self.layer(i);
            let input = activations.last().expect("input present");
            let z: Vec<f64> = layer
                .weights
                .chunks_exact(layer.inputs)
                .zip(layer.bias)
                .map(|(row, b)| row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>() + b)
                .collect();
            if i + 1 < layers {
                activations.push(z.iter().map(|v| v.max(0.0)).collect());
            }
            pre_activations.push(z);
        }
        let p = softmax(pre_activations.last().expect("output layer"));
        ForwardCache {
            activations,
            pre_activations,
            probabilities: ClassProbabilities {
                p_skin: p[0],
                p_non_skin: p[1],
            },
        }
    }

    /// Inference-only forward pass reusing two scratch buffers.
    pub fn forward(&self, x: [f64; 3]) -> ClassProbabilities {
        let layers = self.layer_count();
        let mut input: Vec<f64> = x.to_vec();
        let mut output: Vec<f64> = Vec::with_capacity(self.widths.iter().copied().max().unwrap_or(0));
        for i in 0..layers {
            let layer = self.layer(i);
            output.clear();
            for (row, b) in layer.weights.chunks_exact(layer.inputs).zip(layer.bias) {
                let z = row.iter().zip(&input).map(|(w, a)| w * a).sum::<f64>() + b;
                output.push(if i + 1 < layers { z.max(0.0) } else { z });
            }
            std::mem::swap(&mut input, &mut output);
        }
        let p = softmax(&input);
        ClassProbabilities {
            p_skin: p[0],
            p_non_skin: p[1],
        }
    }

    /// Gradient of the cross-entropy loss for one sample, in parameter
    /// layout. The output delta is `probabilities - one_hot(label)`.
    pub fn backward(&self, cache: &ForwardCache, label: Label) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        self.accumulate_gradient(cache, label, &mut grads);
        grads
    }

    fn accumulate_gradient(&self, cache: &ForwardCache, label: Label, grads: &mut [f64]) {
        let target = one_hot(label);
        let p = cache.probabilities;
        let mut delta = vec![p.p_skin - target[0], p.p_non_skin - target[1]];

        let mut offsets = Vec::with_capacity(self.layer_count());
        let mut acc = 0;
        for w in self.widths.windows(2) {
            offsets.push(acc);
            acc += w[0] * w[1] + w[1];
        }

        for i in (0..self.layer_count()).rev() {
            let layer = self.layer(i);
            let input = &cache.activations[i];
            let off = offsets[i];
            for (o, d) in delta.iter().enumerate() {
                let row = &mut grads[off + o * layer.inputs..off + (o + 1) * layer.inputs];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grads[off + layer.inputs * layer.outputs + o] += d;
            }
            if i == 0 {
                break;
            }
            let pre = &cache.pre_activations[i - 1];
            let mut next = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += w * d;
                }
            }
            for (n, z) in next.iter_mut().zip(pre) {
                if *z <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
    }

    /// Mean loss and mean gradient over a batch.
    pub fn batch_gradient(&self, batch: &[([f64; 3], Label)]) -> (f64, Vec<f64>) {
        let mut grads = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for &(x, label) in batch {
            let cache = self.forward_cached(x);
            loss += cross_entropy(cache.probabilities, label);
            self.accumulate_gradient(&cache, label, &mut grads);
        }
        let n = batch.len() as f64;
        grads.iter_mut().for_each(|g| *g /= n);
        (loss / n, grads)
    }
}

impl PixelClassifier for MlpModel {
    fn classify(&self, pixel: RgbPixel) -> ClassProbabilities {
        self.forward(normalize_hsv(rgb_to_hsv(pixel)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self {
            config,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 12,
            batch_size: 53,
            seed: 0,
        }
    }
}

/// Mini-batch trainer: a model plus its optimizer state.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: MlpModel,
    pub adam: AdamState,
}

impl Trainer {
    pub fn new(model: MlpModel, config: AdamConfig) -> Self {
        let adam = AdamState::new(config, model.params().len());
        Self { model, adam }
    }

    /// One optimizer step on the batch mean gradient; returns the batch's
    /// mean loss before the step.
    pub fn train_batch(&mut self, batch: &[([f64; 3], Label)]) -> f64 {
        let (loss, grads) = self.model.batch_gradient(batch);
        self.adam.step(self.model.params_mut(), &grads);
        loss
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Sample-weighted mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Seeded Glorot initialization, then `epochs` passes over a freshly
/// shuffled copy of the data in batches of `batch_size` (the last batch may
/// be short). Initialization and shuffling draw from one generator.
pub fn train(samples: &[HsvSample], arch: &MlpArchitecture, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    for label in [Label::Skin, Label::NonSkin] {
        if !samples.iter().any(|s| s.label == label) {
            return Err(Error::MissingClass(label));
        }
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be at least 1".into()));
    }
    let mut rng = rng::seeded(cfg.seed);
    let model = MlpModel::glorot(arch, &mut rng)?;
    let mut trainer = Trainer::new(model, AdamConfig::default());
    let mut data: Vec<([f64; 3], Label)> = samples
        .iter()
        .map(|s| (normalize_hsv(s.pixel), s.label))
        .collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        data.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in data.chunks(cfg.batch_size) {
            total += trainer.train_batch(batch) * batch.len() as f64;
        }
        loss_history.push(total / data.len() as f64);
    }
    Ok(TrainOutcome {
        model: trainer.model,
        loss_history,
    })
}
