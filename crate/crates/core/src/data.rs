//! Censored datasets, CSV ingestion, train/test splitting and feature
//! standardization.
//!
//! CSV layout: a header row, then one row per datapoint with columns
//! `x1..xD,y,delta`, where `delta` is 1 for an observed label and 0 for a
//! right-censored one.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthgen::Type1Name;

/// Which ground truth is available, and therefore which metrics apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Synthetic targets with an analytic quantile function.
    Synthetic,
    /// Real targets, synthetic censoring: uncensored targets known.
    SyntheticCensoring,
    /// Real targets, real censoring.
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensoredDataset {
    features: Array2<f64>,
    labels: Vec<f64>,
    observed: Vec<bool>,
    true_targets: Option<Vec<f64>>,
    truth: Option<Type1Name>,
}

impl CensoredDataset {
    pub fn new(features: Array2<f64>, labels: Vec<f64>, observed: Vec<bool>) -> Result<Self> {
        if features.nrows() != labels.len() || labels.len() != observed.len() {
            return Err(Error::Shape(format!(
                "features have {} rows, labels {}, indicators {}",
                features.nrows(),
                labels.len(),
                observed.len()
            )));
        }
        if let Some(i) = labels.iter().position(|y| !y.is_finite()) {
            return Err(Error::Data(format!("non-finite label at row {}", i + 1)));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            observed,
            true_targets: None,
            truth: None,
        })
    }

    /// Attaches uncensored targets `t`. Observed rows must have `y == t`,
    /// censored rows `y < t`.
    pub fn with_true_targets(mut self, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} true targets for {} rows",
                targets.len(),
                self.len()
            )));
        }
        for (i, ((&y, &obs), &t)) in self.labels.iter().zip(&self.observed).zip(&targets).enumerate() {
            let ok = if obs { y == t } else { y < t };
            if !ok {
                return Err(Error::Validation(format!(
                    "row {}: label {y} inconsistent with true target {t} (delta={})",
                    i + 1,
                    obs as u8
                )));
            }
        }
        self.true_targets = Some(targets);
        Ok(self)
    }

    pub fn with_truth(mut self, name: Type1Name) -> Self {
        self.truth = Some(name);
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `true` where Δ = 1.
    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn true_targets(&self) -> Option<&[f64]> {
        self.true_targets.as_deref()
    }

    pub fn truth(&self) -> Option<Type1Name> {
        self.truth
    }

    pub fn kind(&self) -> DatasetKind {
        match (self.truth, &self.true_targets) {
            (Some(_), _) => DatasetKind::Synthetic,
            (None, Some(_)) => DatasetKind::SyntheticCensoring,
            (None, None) => DatasetKind::Real,
        }
    }

    pub fn n_censored(&self) -> usize {
        self.observed.iter().filter(|&&o| !o).count()
    }

    pub fn n_observed(&self) -> usize {
        self.len() - self.n_censored()
    }

    pub fn censored_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.n_censored() as f64 / self.len() as f64
        }
    }

    pub fn max_label(&self) -> f64 {
        self.labels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rows in the given order; ground-truth attachments follow the rows.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            observed: indices.iter().map(|&i| self.observed[i]).collect(),
            true_targets: self
                .true_targets
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
            truth: self.truth,
        }
    }

    pub fn observed_only(&self) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.observed[i]).collect();
        self.select(&idx)
    }

    pub(crate) fn with_features(&self, features: Array2<f64>) -> Self {
        debug_assert_eq!(features.nrows(), self.len());
        Self {
            features,
            ..self.clone()
        }
    }

    pub(crate) fn into_parts(self) -> (Array2<f64>, Vec<f64>, Vec<bool>, Option<Vec<f64>>) {
        (self.features, self.labels, self.observed, self.true_targets)
    }
}

/// Column names for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub feature_columns: Vec<String>,
    pub label_column: String,
    pub indicator_column: String,
}

impl CsvSchema {
    /// `x1..xD,y,delta`.
    pub fn standard(dim: usize) -> Self {
        Self {
            feature_columns: (1..=dim).map(|i| format!("x{i}")).collect(),
            label_column: "y".into(),
            indicator_column: "delta".into(),
        }
    }

    /// Every `x<k>` column in the header, in file order, plus `y` and `delta`.
    pub fn infer(headers: &[String]) -> Self {
        let feature_columns = headers
            .iter()
            .filter(|h| {
                h.strip_prefix('x')
                    .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
            })
            .cloned()
            .collect();
        Self {
            feature_columns,
            label_column: "y".into(),
            indicator_column: "delta".into(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: Option<&CsvSchema>) -> Result<CensoredDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses a dataset. With `schema = None` the columns are inferred as
/// `x<k>..., y, delta`. Row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R, schema: Option<&CsvSchema>) -> Result<CensoredDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Validation("no rows".into()));
    }
    let inferred;
    let schema = match schema {
        Some(s) => s,
        None => {
            inferred = CsvSchema::infer(&headers);
            &inferred
        }
    };
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>>>()?;
    let label_idx = column(&schema.label_column)?;
    let indicator_idx = column(&schema.indicator_column)?;

    let dim = feature_idx.len();
    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut observed = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        let cell = |idx: usize| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row,
                msg: format!("`{raw}` in column `{}` is not a number", headers[idx]),
            })
        };
        for &c in &feature_idx {
            flat.push(cell(c)?);
        }
        labels.push(cell(label_idx)?);
        let delta = cell(indicator_idx)?;
        observed.push(if delta == 1.0 {
            true
        } else if delta == 0.0 {
            false
        } else {
            return Err(Error::Validation(format!(
                "row {row}: indicator must be 0 or 1, got {delta}"
            )));
        });
    }
    if labels.is_empty() {
        return Err(Error::Validation("no rows".into()));
    }
    let features = Array2::from_shape_vec((labels.len(), dim), flat)
        .map_err(|e| Error::Shape(e.to_string()))?;
    CensoredDataset::new(features, labels, observed)
}

pub fn save_csv(ds: &CensoredDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, &mut file)?;
    file.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv<W: Write>(ds: &CensoredDataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = CsvSchema::standard(ds.dim()).feature_columns;
    header.push("y".into());
    header.push("delta".into());
    wtr.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(ds.labels[i].to_string());
        rec.push(if ds.observed[i] { "1" } else { "0" }.into());
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Random partition into `floor(N (1 - f))` training rows and the rest.
pub fn split(ds: &CensoredDataset, cfg: &SplitConfig) -> Result<(CensoredDataset, CensoredDataset)> {
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "test fraction must lie in (0,1), got {}",
            cfg.test_fraction
        )));
    }
    let n = ds.len();
    if n < 2 {
        return Err(Error::Size(format!("need at least 2 rows to split, got {n}")));
    }
    let n_train = ((n as f64 * (1.0 - cfg.test_fraction)).floor() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    Ok((ds.select(&idx[..n_train]), ds.select(&idx[n_train..])))
}

/// Per-feature mean and population standard deviation of a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &CensoredDataset) -> Self {
        Self::fit_features(train.features())
    }

    pub fn fit_features(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Array1<f64> = x.sum_axis(Axis(0)) / n;
        let std = x
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, &m)| (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt())
            .collect();
        Self {
            mean: mean.to_vec(),
            std,
        }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "standardizer fitted on {} features, input has {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (mut col, (&m, &s)) in out.axis_iter_mut(Axis(1)).zip(self.mean.iter().zip(&self.std)) {
            if s > 0.0 {
                col.mapv_inplace(|v| (v - m) / s);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }

    /// Standardizes features; labels and indicators are untouched.
    pub fn apply(&self, ds: &CensoredDataset) -> Result<CensoredDataset> {
        Ok(ds.with_features(self.transform(ds.features())?))
    }
}
