//! Evaluation metrics for censored quantile predictions.
//!
//! `tqmse` and `uql` take predictions at the three benchmark levels; the
//! calibration metrics take predictions over the full grid.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::DatasetKind;
use crate::error::{Error, Result};
use crate::loss::{checkmark, QuantileGrid};

pub const BENCHMARK_LEVELS: [f64; 3] = [0.1, 0.5, 0.9];

/// `(1/N) Σ_τ Σ_i (ŷ_iτ - y_iτ)²`; note the division by `N` only.
pub fn tqmse(pred: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != truth.dim() || pred.nrows() == 0 {
        return Err(Error::Shape(format!(
            "prediction {:?} vs truth {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    let sse: f64 = pred.iter().zip(truth.iter()).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(sse / pred.nrows() as f64)
}

/// `(1/N) Σ_τ Σ_i ρ_τ(y_i, ŷ_iτ)` at τ ∈ {0.1, 0.5, 0.9} on uncensored targets.
pub fn uql(pred: ArrayView2<'_, f64>, y: &[f64]) -> Result<f64> {
    if pred.ncols() != BENCHMARK_LEVELS.len() || pred.nrows() != y.len() || y.is_empty() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs {} targets at 3 levels",
            pred.dim(),
            y.len()
        )));
    }
    let total: f64 = pred
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &yi)| {
            row.iter()
                .zip(BENCHMARK_LEVELS)
                .map(|(&p, t)| checkmark(yi, p, t))
                .sum::<f64>()
        })
        .sum();
    Ok(total / y.len() as f64)
}

fn check_grid_shape(pred: &ArrayView2<'_, f64>, n: usize, grid: &QuantileGrid) -> Result<()> {
    if pred.nrows() != n || pred.ncols() != grid.len() || n == 0 {
        return Err(Error::Shape(format!(
            "prediction {:?} vs {n} labels and {} levels",
            pred.dim(),
            grid.len()
        )));
    }
    Ok(())
}

fn dcal_from_mass(grid: &QuantileGrid, mass: &[f64], n: usize) -> f64 {
    let levels = grid.levels();
    100.0
        * levels
            .windows(2)
            .zip(mass)
            .map(|(w, &m)| ((w[1] - w[0]) - m / n as f64).powi(2))
            .sum::<f64>()
}

/// Index `j` such that `ŷ_j < y <= ŷ_{j+1}`, scanning rows as given.
fn bins_containing(row: ndarray::ArrayView1<'_, f64>, y: f64) -> impl Iterator<Item = usize> + '_ {
    (0..row.len().saturating_sub(1)).filter(move |&j| row[j] < y && y <= row[j + 1])
}

/// Uncensored D-calibration over the full grid, scaled by 100.
///
/// Bins are `(ŷ_j, ŷ_{j+1}]`; rows with crossed quantiles are binned as given.
pub fn undcal(pred: ArrayView2<'_, f64>, y: &[f64], grid: &QuantileGrid) -> Result<f64> {
    check_grid_shape(&pred, y.len(), grid)?;
    let mut mass = vec![0.0; grid.len().saturating_sub(1)];
    for (row, &yi) in pred.rows().into_iter().zip(y) {
        for j in bins_containing(row, yi) {
            mass[j] += 1.0;
        }
    }
    Ok(dcal_from_mass(grid, &mass, y.len()))
}

/// Censored D-calibration. `q_hat` holds one estimated quantile per
/// censored row, in row order.
pub fn censdcal(
    pred: ArrayView2<'_, f64>,
    y: &[f64],
    observed: &[bool],
    q_hat: &[f64],
    grid: &QuantileGrid,
) -> Result<f64> {
    check_grid_shape(&pred, y.len(), grid)?;
    if observed.len() != y.len() {
        return Err(Error::Shape("indicator length mismatch".into()));
    }
    let n_cens = observed.iter().filter(|o| !**o).count();
    if q_hat.len() != n_cens {
        return Err(Error::Shape(format!("{} estimates for {n_cens} censored rows", q_hat.len())));
    }
    if let Some(q) = q_hat.iter().find(|q| !(0.0..1.0).contains(*q)) {
        return Err(Error::Domain(format!("estimated quantile {q} outside [0,1)")));
    }
    let levels = grid.levels();
    let mut mass = vec![0.0; grid.len().saturating_sub(1)];
    let mut c = 0;
    for ((row, &yi), &obs) in pred.rows().into_iter().zip(y).zip(observed) {
        if obs {
            for j in bins_containing(row, yi) {
                mass[j] += 1.0;
            }
            continue;
        }
        let q = q_hat[c];
        c += 1;
        for j in bins_containing(row, yi) {
            mass[j] += (levels[j + 1] - q) / (1.0 - q);
        }
        for (j, m) in mass.iter_mut().enumerate() {
            if q < levels[j] {
                *m += (levels[j + 1] - levels[j]) / (1.0 - q);
            }
        }
    }
    Ok(dcal_from_mass(grid, &mass, y.len()))
}

/// Harrell's concordance index on median predictions.
///
/// A pair is comparable when `y_i < y_j` and row `i` is observed; it is
/// concordant when `ŷ_i < ŷ_j`, and tied predictions count one half.
pub fn c_index(median: &[f64], y: &[f64], observed: &[bool]) -> Result<f64> {
    let n = y.len();
    if median.len() != n || observed.len() != n {
        return Err(Error::Shape("c-index inputs must have equal length".into()));
    }
    let mut comparable = 0u64;
    let mut score = 0.0;
    for i in (0..n).filter(|&i| observed[i]) {
        for j in 0..n {
            if y[i] < y[j] {
                comparable += 1;
                if median[i] < median[j] {
                    score += 1.0;
                } else if median[i] == median[j] {
                    score += 0.5;
                }
            }
        }
    }
    if comparable == 0 {
        return Err(Error::UndefinedMetric("c-index has no comparable pairs".into()));
    }
    Ok(score / comparable as f64)
}

/// Which metrics a dataset type supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Availability {
    pub tqmse: bool,
    pub uql: bool,
    pub undcal: bool,
    pub censdcal: bool,
    pub c_index: bool,
}

impl Availability {
    pub fn for_kind(kind: DatasetKind) -> Self {
        let t1 = kind == DatasetKind::Synthetic;
        let t12 = kind != DatasetKind::Real;
        Self {
            tqmse: t1,
            uql: t12,
            undcal: t12,
            censdcal: true,
            c_index: true,
        }
    }
}

/// One evaluated (dataset, method, seed) cell. Absent metrics are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub grid_size: usize,
    pub tqmse: Option<f64>,
    pub uql: Option<f64>,
    pub undcal: Option<f64>,
    pub censdcal: Option<f64>,
    pub c_index: Option<f64>,
}

impl MetricReport {
    pub const METRIC_NAMES: [&'static str; 5] = ["tqmse", "uql", "undcal", "censdcal", "c_index"];

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "tqmse" => self.tqmse,
            "uql" => self.uql,
            "undcal" => self.undcal,
            "censdcal" => self.censdcal,
            "c_index" => self.c_index,
            _ => None,
        }
    }

    /// True when every present metric is allowed for `kind`.
    pub fn respects(&self, kind: DatasetKind) -> bool {
        let a = Availability::for_kind(kind);
        (a.tqmse || self.tqmse.is_none())
            && (a.uql || self.uql.is_none())
            && (a.undcal || self.undcal.is_none())
            && (a.censdcal || self.censdcal.is_none())
            && (a.c_index || self.c_index.is_none())
    }
}
