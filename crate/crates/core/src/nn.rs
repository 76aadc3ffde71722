//! A small fully-connected network with several linear output heads,
//! hand-written backpropagation, inverted dropout and Adam.
//!
//! Weights are stored `(fan_in, fan_out)` so a batch `X` of shape
//! `(batch, fan_in)` maps to `X·W + b`.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::normal_cdf;
use crate::error::{Error, Result};
use crate::seed::{self, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Gelu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Gelu => z * normal_cdf(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let pdf = (-0.5 * z * z).exp() * 0.398_942_280_401_432_7;
                normal_cdf(z) + z * pdf
            }
        }
    }
}

/// How the final linear layer is turned into outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputHead {
    /// Raw linear outputs.
    #[default]
    Linear,
    /// Output `k` is output `k-1` plus `softplus(raw_k)`, so outputs are
    /// non-decreasing across heads.
    Monotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub n_outputs: usize,
    #[serde(default)]
    pub dropout_enabled: bool,
    #[serde(default = "default_dropout_rate")]
    pub dropout_rate: f64,
    #[serde(default)]
    pub head: OutputHead,
}

fn default_dropout_rate() -> f64 {
    0.5
}

impl NetConfig {
    /// Two hidden layers of 100 units, ReLU, no dropout.
    pub fn new(input_dim: usize, n_outputs: usize) -> Self {
        Self {
            input_dim,
            hidden_sizes: vec![100, 100],
            activation: Activation::Relu,
            n_outputs,
            dropout_enabled: false,
            dropout_rate: 0.5,
            head: OutputHead::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_outputs == 0 || self.hidden_sizes.contains(&0) {
            return Err(Error::Config(format!("all layer sizes must be positive: {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} outside [0,1]", self.dropout_rate)));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![self.input_dim];
        sizes.extend(&self.hidden_sizes);
        sizes.push(self.n_outputs);
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.weights.nrows(), self.weights.ncols())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    config: NetConfig,
    layers: Vec<Dense>,
    version: u64,
}

/// Equal architecture and parameters; the cache version is ignored.
impl PartialEq for MlpModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.layers == other.layers
    }
}

/// Intermediate values from a forward pass, consumed by [`MlpModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    /// Input to each layer (after dropout for hidden layers).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    /// Output-layer values before the head transform.
    raw: Array2<f64>,
}

/// Parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

fn flatten(layers: &[Dense]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MlpModel {
    /// Weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::stream(seed, tags::INIT);
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                        bound * (2.0 * rng.random::<f64>() - 1.0)
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            config,
            layers,
            version: 0,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version += 1;
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.config.parameter_count()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        self.version += 1;
        Ok(())
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<'_, f64>,
        mode: Mode,
        dropout_rng: &mut R,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "network expects {} features, got {}",
                self.config.input_dim,
                x.ncols()
            )));
        }
        let act = self.config.activation;
        let drop = mode == Mode::Train && self.config.dropout_enabled;
        let p = self.config.dropout_rate;
        let keep_scale = if p < 1.0 { 1.0 / (1.0 - p) } else { 0.0 };

        let n_hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(n_hidden);
        let mut masks = Vec::with_capacity(n_hidden);
        let mut a = x.to_owned();
        for layer in &self.layers[..n_hidden] {
            let z = a.dot(&layer.weights) + &layer.bias;
            let mut h = z.mapv(|v| act.apply(v));
            let mask = if drop {
                let m = Array2::from_shape_simple_fn(h.raw_dim(), || {
                    if dropout_rng.random::<f64>() >= p {
                        keep_scale
                    } else {
                        0.0
                    }
                });
                h *= &m;
                Some(m)
            } else {
                None
            };
            inputs.push(std::mem::replace(&mut a, h));
            pre.push(z);
            masks.push(mask);
        }
        let last = &self.layers[n_hidden];
        let raw = a.dot(&last.weights) + &last.bias;
        inputs.push(a);
        let out = match self.config.head {
            OutputHead::Linear => raw.clone(),
            OutputHead::Monotone => {
                let mut out = raw.clone();
                for mut row in out.rows_mut() {
                    for k in 1..row.len() {
                        row[k] = row[k - 1] + softplus(row[k]);
                    }
                }
                out
            }
        };
        Ok((
            out,
            ForwardCache {
                version: self.version,
                inputs,
                pre,
                masks,
                raw,
            },
        ))
    }

    /// Deterministic evaluation-mode outputs.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut unused = seed::stream(0, 0);
        Ok(self.forward(x, Mode::Eval, &mut unused)?.0)
    }

    /// Gradient of `sum(outputs ⊙ grad_outputs)` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, grad_outputs: ArrayView2<'_, f64>) -> Result<Gradients> {
        if cache.version != self.version {
            return Err(Error::Usage(
                "forward cache is stale: parameters changed since the forward pass".into(),
            ));
        }
        if grad_outputs.dim() != cache.raw.dim() {
            return Err(Error::Shape(format!(
                "grad_outputs {:?} does not match outputs {:?}",
                grad_outputs.dim(),
                cache.raw.dim()
            )));
        }
        let mut g = match self.config.head {
            OutputHead::Linear => grad_outputs.to_owned(),
            OutputHead::Monotone => {
                let mut g = grad_outputs.to_owned();
                for (mut grow, rrow) in g.rows_mut().into_iter().zip(cache.raw.rows()) {
                    // Suffix sums: raw_k feeds every output at index >= k.
                    let mut acc = 0.0;
                    for k in (0..grow.len()).rev() {
                        acc += grow[k];
                        grow[k] = if k == 0 { acc } else { acc * sigmoid(rrow[k]) };
                    }
                }
                g
            }
        };

        let act = self.config.activation;
        let mut grads: Vec<Dense> = self.layers.iter().map(Dense::zeros_like).collect();
        for l in (0..self.layers.len()).rev() {
            let input = &cache.inputs[l];
            grads[l].weights = input.t().dot(&g);
            grads[l].bias = g.sum_axis(Axis(0));
            if l == 0 {
                break;
            }
            let mut ga = g.dot(&self.layers[l].weights.t());
            let h = l - 1;
            if let Some(mask) = &cache.masks[h] {
                ga *= mask;
            }
            Zip::from(&mut ga)
                .and(&cache.pre[h])
                .for_each(|gv, &z| *gv *= act.derivative(z));
            g = ga;
        }
        Ok(Gradients { layers: grads })
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            params: self.params_flat(),
        }
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        ckpt.config.validate()?;
        let mut model = Self {
            layers: ckpt
                .config
                .layer_dims()
                .into_iter()
                .map(|(i, o)| Dense::zeros(i, o))
                .collect(),
            config: ckpt.config.clone(),
            version: 0,
        };
        model.set_params_flat(&ckpt.params)?;
        Ok(model)
    }
}

pub const CHECKPOINT_FORMAT: &str = "cqrnn-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint: config plus the flat parameter vector (layer by layer,
/// weights row-major then bias).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: NetConfig,
    pub params: Vec<f64>,
}

impl ModelCheckpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_vec(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Fractions of the total step budget after which the rate is multiplied
    /// by `drop_factor`.
    pub drop_points: Vec<f64>,
    pub drop_factor: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            drop_points: vec![0.7, 0.9],
            drop_factor: 0.1,
        }
    }
}

impl AdamConfig {
    /// Rate used for the `step`-th update (1-based) out of `total_steps`.
    pub fn learning_rate(&self, step: usize, total_steps: usize) -> f64 {
        let drops = self
            .drop_points
            .iter()
            .filter(|&&p| step >= (p * total_steps as f64).ceil() as usize)
            .count();
        self.lr * self.drop_factor.powi(drops as i32)
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Dense>,
    v: Vec<Dense>,
    step: usize,
}

impl AdamState {
    pub fn new(model: &MlpModel, config: AdamConfig) -> Self {
        let zeros: Vec<Dense> = model.layers.iter().map(Dense::zeros_like).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Rate that the next update will use.
    pub fn current_lr(&self, total_steps: usize) -> f64 {
        self.config.learning_rate(self.step + 1, total_steps)
    }

    /// One Adam update with decoupled weight decay.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients, total_steps: usize) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Numeric {
                step: self.step + 1,
                msg: "non-finite gradient".into(),
            });
        }
        if grads.layers.len() != model.layers.len() {
            return Err(Error::Shape("gradient layout does not match model".into()));
        }
        self.step += 1;
        let c = &self.config;
        let lr = c.learning_rate(self.step, total_steps);
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let (b1, b2, eps, wd) = (c.beta1, c.beta2, c.eps, c.weight_decay);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *p);
        };
        for (((layer, m), v), g) in model
            .layers
            .iter_mut()
            .zip(&mut self.m)
            .zip(&mut self.v)
            .zip(&grads.layers)
        {
            Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(update);
        }
        model.version += 1;
        Ok(())
    }
}
