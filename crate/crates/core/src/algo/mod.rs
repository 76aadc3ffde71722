//! Training procedures for censored quantile models and unified prediction.

mod train;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{CensoredDataset, Standardizer};
use crate::distributions::normal_inv_cdf;
use crate::error::{Error, Result};
use crate::loss::{lognorm_sigma, PseudoValue, QuantileGrid};
use crate::nn::{Activation, AdamConfig, MlpModel, ModelCheckpoint, OutputHead};

pub use train::{
    train, train_cqrnn, train_excl_censor, train_lognorm_mle, train_sequential_grid, EpochLog, TrainOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cqrnn,
    #[serde(rename = "seqgrid")]
    SeqGrid,
    Excl,
    #[serde(rename = "lognorm")]
    LogNorm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cqrnn, Method::SeqGrid, Method::Excl, Method::LogNorm];

    pub fn id(self) -> &'static str {
        match self {
            Method::Cqrnn => "cqrnn",
            Method::SeqGrid => "seqgrid",
            Method::Excl => "excl",
            Method::LogNorm => "lognorm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Usage(format!("unknown method '{s}' (expected cqrnn, seqgrid, excl or lognorm)")))
    }
}

/// How a censored point is marked as crossed between consecutive levels of
/// the sequential grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingRule {
    /// Crossed when the newest level's prediction is at or below `y_j` and
    /// the one before it is above.
    #[default]
    Printed,
    /// Crossed when the newest level's prediction is at or above `y_j` and
    /// the one before it is below.
    Conventional,
}

/// Hard expectation step used by CQRNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HardE {
    /// Grid level whose prediction is nearest the censored label.
    #[default]
    Nearest,
    /// Linear interpolation between the bracketing levels, clipped to the grid.
    Interpolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub grid: QuantileGrid,
    pub pseudo: PseudoValue,
    pub seed: u64,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub dropout: bool,
    pub dropout_rate: f64,
    pub head: OutputHead,
    pub crossing_weight: f64,
    pub crossing_margin: f64,
    pub crossing_rule: CrossingRule,
    pub hard_e: HardE,
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            adam: AdamConfig::default(),
            grid: QuantileGrid::uniform(9).expect("valid grid"),
            pseudo: PseudoValue::default(),
            seed: 0,
            hidden_sizes: vec![100, 100],
            activation: Activation::Relu,
            dropout: false,
            dropout_rate: 0.5,
            head: OutputHead::Linear,
            crossing_weight: 0.0,
            crossing_margin: 0.0,
            crossing_rule: CrossingRule::Printed,
            hard_e: HardE::Nearest,
            standardize: true,
        }
    }
}

/// 100 epochs up to 1000 training points, 20 up to 2500, 10 beyond.
pub fn default_epochs(n_train: usize) -> usize {
    match n_train {
        0..=1000 => 100,
        1001..=2500 => 20,
        _ => 10,
    }
}

/// Epoch budget for size ablations: `500 * 200 / N`, at least one.
pub fn ablation_epochs(n_train: usize) -> usize {
    ((100_000.0 / n_train.max(1) as f64).round() as usize).max(1)
}

impl TrainConfig {
    /// Defaults scaled to the training-set size (epochs and grid size).
    pub fn for_size(n_train: usize) -> Self {
        Self {
            epochs: default_epochs(n_train),
            grid: QuantileGrid::default_for_size(n_train),
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.crossing_weight < 0.0 {
            return Err(Error::Config("crossing-penalty weight must be non-negative".into()));
        }
        PseudoValue::new(self.pseudo.c)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    /// One network with a head per grid level.
    Multi(MlpModel),
    /// One single-output network per trained level; later levels reuse the last.
    PerLevel(Vec<MlpModel>),
    /// Heads `(μ, raw σ)` of a log-normal distribution.
    LogNormal(MlpModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedQuantileModel {
    pub method: Method,
    pub grid: QuantileGrid,
    pub standardizer: Option<Standardizer>,
    pub y_star: Option<f64>,
    pub network: Network,
}

/// Nearest grid level to `y` along a prediction row; ties go to the lower level.
pub fn nearest_level(row: ArrayView1<'_, f64>, y: f64, grid: &QuantileGrid) -> f64 {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &p) in row.iter().enumerate() {
        let d = (p - y).abs();
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    grid.levels()[best]
}

/// Level at which `y` sits along the row, interpolating between bracketing
/// predictions and clipping to the grid ends.
pub fn interpolated_level(row: ArrayView1<'_, f64>, y: f64, grid: &QuantileGrid) -> f64 {
    let lv = grid.levels();
    let m = row.len();
    if y <= row[0] {
        return lv[0];
    }
    if y >= row[m - 1] {
        return lv[m - 1];
    }
    for k in 0..m - 1 {
        let (a, b) = (row[k], row[k + 1]);
        if a <= y && y <= b {
            if b == a {
                return lv[k];
            }
            return lv[k] + (lv[k + 1] - lv[k]) * (y - a) / (b - a);
        }
    }
    nearest_level(row, y, grid)
}

pub(crate) fn hard_e(row: ArrayView1<'_, f64>, y: f64, grid: &QuantileGrid, rule: HardE) -> f64 {
    match rule {
        HardE::Nearest => nearest_level(row, y, grid),
        HardE::Interpolated => interpolated_level(row, y, grid),
    }
}

/// Quantile level of `y` used when scoring calibration: interpolated
/// between bracketing predictions, 0 below the lowest prediction and the
/// top level above the highest.
pub fn calibration_level(row: ArrayView1<'_, f64>, y: f64, grid: &QuantileGrid) -> f64 {
    if y <= row[0] {
        0.0
    } else {
        interpolated_level(row, y, grid)
    }
}

/// [`calibration_level`] for every censored row, in row order.
pub fn calibration_quantiles(
    pred: ArrayView2<'_, f64>,
    labels: &[f64],
    observed: &[bool],
    grid: &QuantileGrid,
) -> Result<Vec<f64>> {
    check_pred_shape(&pred, labels, observed, grid)?;
    Ok(pred
        .rows()
        .into_iter()
        .zip(labels)
        .zip(observed)
        .filter(|(_, &o)| !o)
        .map(|((row, &y), _)| calibration_level(row, y, grid))
        .collect())
}

fn check_pred_shape(pred: &ArrayView2<'_, f64>, labels: &[f64], observed: &[bool], grid: &QuantileGrid) -> Result<()> {
    if pred.nrows() != labels.len() || pred.ncols() != grid.len() || observed.len() != labels.len() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs {} labels and {} levels",
            pred.dim(),
            labels.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Hard-E estimates `q̂_j` for every censored row of `labels`/`observed`,
/// given full-grid predictions.
pub fn estimate_censored_quantiles(
    pred: ArrayView2<'_, f64>,
    labels: &[f64],
    observed: &[bool],
    grid: &QuantileGrid,
) -> Result<Vec<f64>> {
    check_pred_shape(&pred, labels, observed, grid)?;
    Ok(pred
        .rows()
        .into_iter()
        .zip(labels)
        .zip(observed)
        .filter(|(_, &o)| !o)
        .map(|((row, &y), _)| nearest_level(row, y, grid))
        .collect())
}

impl TrainedQuantileModel {
    pub fn input_dim(&self) -> usize {
        match &self.network {
            Network::Multi(m) | Network::LogNormal(m) => m.config().input_dim,
            Network::PerLevel(ms) => ms[0].config().input_dim,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match &self.network {
            Network::Multi(m) | Network::LogNormal(m) => m.parameter_count(),
            Network::PerLevel(ms) => ms[0].parameter_count() * self.grid.len(),
        }
    }

    fn prepare(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        match &self.standardizer {
            Some(s) => s.transform(x),
            None => Ok(x.to_owned()),
        }
    }

    /// Quantile predictions at every grid level for raw (unstandardized) inputs.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let xs = self.prepare(x)?;
        match &self.network {
            Network::Multi(m) => m.predict(xs.view()),
            Network::PerLevel(ms) => {
                let mut out = Array2::zeros((xs.nrows(), self.grid.len()));
                let mut last = None;
                for k in 0..self.grid.len() {
                    if let Some(net) = ms.get(k) {
                        last = Some(net.predict(xs.view())?.column(0).to_owned());
                    }
                    out.column_mut(k).assign(last.as_ref().expect("at least one level"));
                }
                Ok(out)
            }
            Network::LogNormal(_) => self.predict_levels(x, self.grid.levels()),
        }
    }

    /// Predictions at arbitrary levels. Grid-based models only support
    /// levels on their grid.
    pub fn predict_levels(&self, x: ArrayView2<'_, f64>, levels: &[f64]) -> Result<Array2<f64>> {
        if let Network::LogNormal(m) = &self.network {
            let xs = self.prepare(x)?;
            let params = m.predict(xs.view())?;
            let z: Vec<f64> = levels.iter().map(|&t| normal_inv_cdf(t)).collect();
            return Ok(Array2::from_shape_fn((xs.nrows(), levels.len()), |(i, k)| {
                (params[[i, 0]] + lognorm_sigma(params[[i, 1]]) * z[k]).exp()
            }));
        }
        let idx = levels
            .iter()
            .map(|&t| {
                self.grid
                    .index_of(t)
                    .ok_or_else(|| Error::Config(format!("level {t} is not on the model grid")))
            })
            .collect::<Result<Vec<_>>>()?;
        let full = self.predict(x)?;
        Ok(full.select(ndarray::Axis(1), &idx))
    }

    /// Hard-E estimates for the censored rows of `ds` under this model.
    pub fn estimate_censored_quantiles(&self, ds: &CensoredDataset) -> Result<Vec<f64>> {
        let pred = self.predict(ds.features())?;
        estimate_censored_quantiles(pred.view(), ds.labels(), ds.observed(), &self.grid)
    }

    pub fn to_saved(&self) -> SavedModel {
        let networks = match &self.network {
            Network::Multi(m) | Network::LogNormal(m) => vec![m.to_checkpoint()],
            Network::PerLevel(ms) => ms.iter().map(MlpModel::to_checkpoint).collect(),
        };
        SavedModel {
            format: SAVED_FORMAT.into(),
            version: SAVED_VERSION,
            method: self.method,
            grid: self.grid.clone(),
            standardizer: self.standardizer.clone(),
            y_star: self.y_star,
            networks,
        }
    }

    pub fn from_saved(saved: &SavedModel) -> Result<Self> {
        if saved.format != SAVED_FORMAT || saved.version != SAVED_VERSION {
            return Err(Error::Data(format!("unsupported model file {} v{}", saved.format, saved.version)));
        }
        let nets = saved
            .networks
            .iter()
            .map(MlpModel::from_checkpoint)
            .collect::<Result<Vec<_>>>()?;
        if nets.is_empty() {
            return Err(Error::Data("model file has no networks".into()));
        }
        let network = match saved.method {
            Method::SeqGrid => Network::PerLevel(nets),
            Method::LogNorm => Network::LogNormal(nets.into_iter().next().expect("non-empty")),
            Method::Cqrnn | Method::Excl => Network::Multi(nets.into_iter().next().expect("non-empty")),
        };
        Ok(Self {
            method: saved.method,
            grid: saved.grid.clone(),
            standardizer: saved.standardizer.clone(),
            y_star: saved.y_star,
            network,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_vec(&self.to_saved())?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_saved(&serde_json::from_slice(&bytes)?)
    }
}

pub const SAVED_FORMAT: &str = "cqrnn-model";
pub const SAVED_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub grid: QuantileGrid,
    pub standardizer: Option<Standardizer>,
    pub y_star: Option<f64>,
    pub networks: Vec<ModelCheckpoint>,
}
