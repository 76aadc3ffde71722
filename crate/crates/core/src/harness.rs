//! Multi-seed experiment runner: dataset sources, per-cell training and
//! evaluation, summaries and ablation sweeps.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algo::{ablation_epochs, default_epochs, train, Method, TrainConfig, TrainOutcome, TrainedQuantileModel};
use crate::data::{load_csv, split, CensoredDataset, DatasetKind, SplitConfig};
use crate::error::{Error, Result};
use crate::loss::{PseudoValue, QuantileGrid};
use crate::metrics::{self, Availability, MetricReport, BENCHMARK_LEVELS};
use crate::nn::OutputHead;
use crate::seed::{self, tags};
use crate::synthgen::{overlay_censoring, true_quantile_matrix, CensorOverlay, Type1Name, Type1Spec};

/// Labels at or below this value are raised to it before fitting the
/// log-normal model, whose likelihood needs positive labels.
pub const LOGNORM_LABEL_FLOOR: f64 = 1e-3;

/// Environment variable holding the worker count for parallel cells.
pub const WORKERS_ENV: &str = "CQRNN_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Generated afresh for every seed.
    Synthetic {
        name: Type1Name,
        #[serde(default)]
        n_train: Option<usize>,
        #[serde(default)]
        n_test: Option<usize>,
    },
    /// Uncensored CSV with `U(0, multiple * max y)` censoring applied per seed.
    CensorOverlay {
        path: PathBuf,
        #[serde(default = "default_overlay_multiple")]
        multiple: f64,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    /// Censored CSV split per seed.
    Csv {
        path: PathBuf,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn default_overlay_multiple() -> f64 {
    1.5
}

fn default_test_fraction() -> f64 {
    0.2
}

impl DatasetSource {
    pub fn synthetic(name: Type1Name) -> Self {
        DatasetSource::Synthetic {
            name,
            n_train: None,
            n_test: None,
        }
    }

    pub fn id(&self) -> String {
        match self {
            DatasetSource::Synthetic { name, .. } => name.id().to_string(),
            DatasetSource::CensorOverlay { path, .. } | DatasetSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    pub fn kind(&self) -> DatasetKind {
        match self {
            DatasetSource::Synthetic { .. } => DatasetKind::Synthetic,
            DatasetSource::CensorOverlay { .. } => DatasetKind::SyntheticCensoring,
            DatasetSource::Csv { .. } => DatasetKind::Real,
        }
    }

    /// Train and test sets for one seed.
    pub fn load(&self, seed: u64) -> Result<(CensoredDataset, CensoredDataset)> {
        let split_cfg = |f: f64| SplitConfig {
            test_fraction: f,
            seed: seed::derive(seed, tags::SPLIT),
        };
        match self {
            DatasetSource::Synthetic { name, n_train, n_test } => {
                let (dtr, dte) = name.default_sizes();
                Type1Spec::new(*name)
                    .with_sizes(n_train.unwrap_or(dtr), n_test.unwrap_or(dte))
                    .generate_train_test(seed)
            }
            DatasetSource::CensorOverlay {
                path,
                multiple,
                test_fraction,
            } => {
                let raw = load_csv(path, None)?;
                let censored = overlay_censoring(&raw, &CensorOverlay::multiple_of_max(*multiple), seed)?;
                split(&censored, &split_cfg(*test_fraction))
            }
            DatasetSource::Csv { path, test_fraction } => split(&load_csv(path, None)?, &split_cfg(*test_fraction)),
        }
    }
}

/// One (dataset, method, seed) unit of work.
#[derive(Debug, Clone)]
pub struct Cell {
    pub source: DatasetSource,
    pub method: Method,
    pub seed: u64,
    /// Free-form label for ablation variants.
    pub variant: String,
    /// Template for everything not resolved from the training size.
    pub base: TrainConfig,
    /// Defaults to the size-based epoch bucket.
    pub epochs: Option<usize>,
    /// Defaults to the size-based grid.
    pub grid: Option<QuantileGrid>,
}

impl Cell {
    pub fn new(source: DatasetSource, method: Method, seed: u64) -> Self {
        Self {
            source,
            method,
            seed,
            variant: String::new(),
            base: TrainConfig::default(),
            epochs: None,
            grid: None,
        }
    }

    pub fn resolve_config(&self, n_train: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs.unwrap_or_else(|| default_epochs(n_train)),
            grid: self.grid.clone().unwrap_or_else(|| QuantileGrid::default_for_size(n_train)),
            seed: self.seed,
            ..self.base.clone()
        }
    }
}

/// One row of experiment output. Metrics are empty when unavailable or when
/// the run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub method: String,
    pub variant: String,
    pub seed: u64,
    pub n_train: usize,
    pub grid_size: usize,
    pub tqmse: Option<f64>,
    pub uql: Option<f64>,
    pub undcal: Option<f64>,
    pub censdcal: Option<f64>,
    pub c_index: Option<f64>,
    pub train_ms: Option<f64>,
    pub params: Option<usize>,
    /// `ok`, or the error that stopped the run.
    pub status: String,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn report(&self) -> MetricReport {
        MetricReport {
            dataset: self.dataset.clone(),
            method: self.method.clone(),
            seed: self.seed,
            grid_size: self.grid_size,
            tqmse: self.tqmse,
            uql: self.uql,
            undcal: self.undcal,
            censdcal: self.censdcal,
            c_index: self.c_index,
        }
    }
}

/// Everything produced by a single cell, for callers that need the model.
pub struct CellOutput {
    pub record: RunRecord,
    pub outcome: Option<TrainOutcome>,
    pub train: CensoredDataset,
    pub test: CensoredDataset,
}

/// Scores a trained model on `test`, honouring metric availability.
pub fn evaluate(
    model: &TrainedQuantileModel,
    test: &CensoredDataset,
    dataset: &str,
    seed: u64,
) -> Result<MetricReport> {
    let avail = Availability::for_kind(test.kind());
    let full = model.predict(test.features())?;
    if full.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            step: 0,
            msg: "non-finite test predictions".into(),
        });
    }
    let bench = model.predict_levels(test.features(), &BENCHMARK_LEVELS)?;
    let grid = &model.grid;
    let mut r = MetricReport {
        dataset: dataset.to_string(),
        method: model.method.id().to_string(),
        seed,
        grid_size: grid.len(),
        tqmse: None,
        uql: None,
        undcal: None,
        censdcal: None,
        c_index: None,
    };
    if avail.tqmse {
        if let Some(name) = test.truth() {
            let truth = true_quantile_matrix(name, test.features(), &BENCHMARK_LEVELS)?;
            r.tqmse = Some(metrics::tqmse(bench.view(), truth.view())?);
        }
    }
    if let Some(t) = test.true_targets() {
        if avail.uql {
            r.uql = Some(metrics::uql(bench.view(), t)?);
        }
        if avail.undcal {
            r.undcal = Some(metrics::undcal(full.view(), t, grid)?);
        }
    }
    let q_hat = crate::algo::calibration_quantiles(full.view(), test.labels(), test.observed(), grid)?;
    r.censdcal = Some(metrics::censdcal(full.view(), test.labels(), test.observed(), &q_hat, grid)?);
    let median = bench.column(1).to_vec();
    r.c_index = match metrics::c_index(&median, test.labels(), test.observed()) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(r)
}

fn floor_labels(ds: &CensoredDataset) -> Result<CensoredDataset> {
    if ds.labels().iter().all(|&y| y > LOGNORM_LABEL_FLOOR) {
        return Ok(ds.clone());
    }
    let labels = ds.labels().iter().map(|&y| y.max(LOGNORM_LABEL_FLOOR)).collect();
    CensoredDataset::new(ds.features().to_owned(), labels, ds.observed().to_vec())
}

/// Trains `method` on `train` and scores it on `test`. Errors propagate.
pub fn fit_and_evaluate(
    method: Method,
    train_ds: &CensoredDataset,
    test_ds: &CensoredDataset,
    cfg: &TrainConfig,
    dataset: &str,
    variant: &str,
) -> Result<(RunRecord, TrainOutcome)> {
    let fit_ds = if method == Method::LogNorm {
        floor_labels(train_ds)?
    } else {
        train_ds.clone()
    };
    let start = Instant::now();
    let outcome = train(method, &fit_ds, cfg)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let r = evaluate(&outcome.model, test_ds, dataset, cfg.seed)?;
    let record = RunRecord {
        dataset: dataset.to_string(),
        method: method.id().to_string(),
        variant: variant.to_string(),
        seed: cfg.seed,
        n_train: train_ds.len(),
        grid_size: cfg.grid.len(),
        tqmse: r.tqmse,
        uql: r.uql,
        undcal: r.undcal,
        censdcal: r.censdcal,
        c_index: r.c_index,
        train_ms: Some(elapsed),
        params: Some(outcome.model.parameter_count()),
        status: "ok".into(),
    };
    Ok((record, outcome))
}

/// Loads data, trains and evaluates one cell. Numeric and data failures
/// during training or evaluation become a record with a non-`ok` status;
/// errors loading the dataset propagate.
pub fn run_cell_full(cell: &Cell) -> Result<CellOutput> {
    let (train_ds, test_ds) = cell.source.load(cell.seed)?;
    let cfg = cell.resolve_config(train_ds.len());
    let dataset = cell.source.id();
    match fit_and_evaluate(cell.method, &train_ds, &test_ds, &cfg, &dataset, &cell.variant) {
        Ok((record, outcome)) => Ok(CellOutput {
            record,
            outcome: Some(outcome),
            train: train_ds,
            test: test_ds,
        }),
        Err(e @ (Error::Numeric { .. } | Error::Data(_))) => Ok(CellOutput {
            record: RunRecord {
                dataset,
                method: cell.method.id().to_string(),
                variant: cell.variant.clone(),
                seed: cell.seed,
                n_train: train_ds.len(),
                grid_size: cfg.grid.len(),
                tqmse: None,
                uql: None,
                undcal: None,
                censdcal: None,
                c_index: None,
                train_ms: None,
                params: None,
                status: format!("failed: {e}"),
            },
            outcome: None,
            train: train_ds,
            test: test_ds,
        }),
        Err(e) => Err(e),
    }
}

pub fn run_cell(cell: &Cell) -> Result<RunRecord> {
    Ok(run_cell_full(cell)?.record)
}

/// Worker count from the environment, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs cells on a pool of `workers` threads; output order matches input.
pub fn run_cells(cells: &[Cell], workers: usize) -> Result<Vec<RunRecord>> {
    run_cells_with(cells, workers, |_, out| Ok(out.record))
}

/// Like [`run_cells`], handing each finished cell to `finish` (for example
/// to save its model) on the worker that ran it.
pub fn run_cells_with<F>(cells: &[Cell], workers: usize, finish: F) -> Result<Vec<RunRecord>>
where
    F: Fn(&Cell, CellOutput) -> Result<RunRecord> + Sync,
{
    let one = |c: &Cell| run_cell_full(c).and_then(|out| finish(c, out));
    if workers <= 1 {
        return cells.iter().map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| cells.par_iter().map(one).collect())
}

/// Mean and standard error (sample sd / sqrt(n)) over a set of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(values: &[f64]) -> Option<MeanSe> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanSe { mean, se, n })
}

/// Aggregate over the successful seeds of one (dataset, method, variant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: String,
    pub variant: String,
    pub runs: usize,
    pub failed: usize,
    pub tqmse_mean: Option<f64>,
    pub tqmse_se: Option<f64>,
    pub uql_mean: Option<f64>,
    pub uql_se: Option<f64>,
    pub undcal_mean: Option<f64>,
    pub undcal_se: Option<f64>,
    pub censdcal_mean: Option<f64>,
    pub censdcal_se: Option<f64>,
    pub c_index_mean: Option<f64>,
    pub c_index_se: Option<f64>,
    pub train_ms_mean: Option<f64>,
    pub train_ms_se: Option<f64>,
}

impl SummaryRow {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        match metric {
            "tqmse" => self.tqmse_mean,
            "uql" => self.uql_mean,
            "undcal" => self.undcal_mean,
            "censdcal" => self.censdcal_mean,
            "c_index" => self.c_index_mean,
            "train_ms" => self.train_ms_mean,
            _ => None,
        }
    }

    pub fn se(&self, metric: &str) -> Option<f64> {
        match metric {
            "tqmse" => self.tqmse_se,
            "uql" => self.uql_se,
            "undcal" => self.undcal_se,
            "censdcal" => self.censdcal_se,
            "c_index" => self.c_index_se,
            "train_ms" => self.train_ms_se,
            _ => None,
        }
    }
}

/// Groups records by (dataset, method, variant) in first-seen order.
/// Failed runs are counted but excluded from the statistics.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, String)> = Vec::new();
    for r in records {
        let k = (r.dataset.clone(), r.method.clone(), r.variant.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(dataset, method, variant)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.dataset == dataset && r.method == method && r.variant == variant)
                .collect();
            let ok: Vec<&&RunRecord> = group.iter().filter(|r| r.is_ok()).collect();
            let stat = |f: fn(&RunRecord) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                mean_se(&v)
            };
            let pair = |s: Option<MeanSe>| (s.map(|m| m.mean), s.map(|m| m.se));
            let (tqmse_mean, tqmse_se) = pair(stat(|r| r.tqmse));
            let (uql_mean, uql_se) = pair(stat(|r| r.uql));
            let (undcal_mean, undcal_se) = pair(stat(|r| r.undcal));
            let (censdcal_mean, censdcal_se) = pair(stat(|r| r.censdcal));
            let (c_index_mean, c_index_se) = pair(stat(|r| r.c_index));
            let (train_ms_mean, train_ms_se) = pair(stat(|r| r.train_ms));
            SummaryRow {
                runs: group.len(),
                failed: group.len() - ok.len(),
                dataset,
                method,
                variant,
                tqmse_mean,
                tqmse_se,
                uql_mean,
                uql_se,
                undcal_mean,
                undcal_se,
                censdcal_mean,
                censdcal_se,
                c_index_mean,
                c_index_se,
                train_ms_mean,
                train_ms_se,
            }
        })
        .collect()
}

/// Markdown table of `mean ± se` per metric, one row per summary row.
pub fn summary_markdown(rows: &[SummaryRow]) -> String {
    let cols = ["tqmse", "uql", "undcal", "censdcal", "c_index"];
    let mut s = String::from("| dataset | method | variant | runs | failed | TQMSE | UQL | UnDCal | CensDCal | C-index |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let cells: Vec<String> = cols
            .iter()
            .map(|c| match (r.mean(c), r.se(c)) {
                (Some(m), Some(e)) => format!("{m:.3} ± {e:.3}"),
                _ => "-".into(),
            })
            .collect();
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            r.dataset,
            r.method,
            if r.variant.is_empty() { "-" } else { &r.variant },
            r.runs,
            r.failed,
            cells.join(" | ")
        ));
    }
    s
}

pub const ABLATION_GRID_SIZES: [usize; 3] = [9, 19, 39];
pub const ABLATION_TRAIN_SIZES: [usize; 8] = [100, 200, 400, 800, 1600, 3200, 6400, 12800];
pub const ABLATION_YSTAR: [f64; 6] = [1.0, 1.2, 1.5, 2.0, 10.0, 100.0];

/// Grid-size by training-size sweep for CQRNN, with the size-scaled epoch budget.
pub fn grid_ablation_cells(name: Type1Name, grid_sizes: &[usize], train_sizes: &[usize], seeds: &[u64]) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for &m in grid_sizes {
        let grid = QuantileGrid::uniform(m)?;
        grid.require_benchmark_levels()?;
        for &n in train_sizes {
            if n == 0 {
                return Err(Error::Parameter("training size must be positive".into()));
            }
            for &seed in seeds {
                let mut c = Cell::new(
                    DatasetSource::Synthetic {
                        name,
                        n_train: Some(n),
                        n_test: None,
                    },
                    Method::Cqrnn,
                    seed,
                );
                c.variant = format!("M={m},N={n}");
                c.grid = Some(grid.clone());
                c.epochs = Some(ablation_epochs(n));
                cells.push(c);
            }
        }
    }
    Ok(cells)
}

/// CQRNN with the pseudo value at each multiple of the largest training label.
pub fn ystar_ablation_cells(name: Type1Name, multiples: &[f64], seeds: &[u64]) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for &c_mult in multiples {
        let pseudo = PseudoValue::new(c_mult)?;
        for &seed in seeds {
            let mut c = Cell::new(DatasetSource::synthetic(name), Method::Cqrnn, seed);
            c.variant = format!("c={c_mult}");
            c.base.pseudo = pseudo;
            cells.push(c);
        }
    }
    Ok(cells)
}

/// CQRNN with no crossing control, a hinge crossing penalty, and a monotone head.
pub fn crossing_ablation_cells(name: Type1Name, seeds: &[u64]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for variant in ["none", "penalty", "monotone"] {
        for &seed in seeds {
            let mut c = Cell::new(DatasetSource::synthetic(name), Method::Cqrnn, seed);
            c.variant = variant.to_string();
            match variant {
                "penalty" => c.base.crossing_weight = 1.0,
                "monotone" => c.base.head = OutputHead::Monotone,
                _ => {}
            }
            cells.push(c);
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(v: f64, status: &str) -> RunRecord {
        RunRecord {
            dataset: "d".into(),
            method: "cqrnn".into(),
            variant: String::new(),
            seed: 0,
            n_train: 10,
            grid_size: 9,
            tqmse: Some(v),
            uql: None,
            undcal: None,
            censdcal: Some(v),
            c_index: None,
            train_ms: Some(1.0),
            params: Some(3),
            status: status.into(),
        }
    }

    #[test]
    fn mean_se_identical_values() {
        let s = mean_se(&[2.5; 10]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.se, 0.0);
        assert!(mean_se(&[]).is_none());
        let s = mean_se(&[1.0, 3.0]).unwrap();
        assert!((s.se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summary_excludes_failures() {
        let recs = vec![record(1.0, "ok"), record(3.0, "ok"), record(f64::NAN, "failed: numeric")];
        let s = summarize(&recs);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].runs, 3);
        assert_eq!(s[0].failed, 1);
        assert_eq!(s[0].tqmse_mean, Some(2.0));
        assert_eq!(s[0].uql_mean, None);
        assert!(summary_markdown(&s).contains("2.000 ± 1.000"));
    }

    #[test]
    fn ablation_cell_counts() {
        let seeds = [0, 1];
        let g = grid_ablation_cells(Type1Name::NormLinear, &ABLATION_GRID_SIZES, &ABLATION_TRAIN_SIZES, &seeds).unwrap();
        assert_eq!(g.len(), 3 * 8 * 2);
        let y = ystar_ablation_cells(Type1Name::NormLight, &ABLATION_YSTAR, &seeds).unwrap();
        assert_eq!(y.len(), 6 * 2);
        assert!(ystar_ablation_cells(Type1Name::NormLight, &[0.5], &seeds).is_err());
        assert_eq!(crossing_ablation_cells(Type1Name::NormLinear, &seeds).len(), 6);
    }

    #[test]
    fn small_cell_runs() {
        let mut cell = Cell::new(
            DatasetSource::Synthetic {
                name: Type1Name::NormLinear,
                n_train: Some(100),
                n_test: Some(50),
            },
            Method::Cqrnn,
            1,
        );
        cell.epochs = Some(2);
        cell.base.hidden_sizes = vec![8];
        let r = run_cell(&cell).unwrap();
        assert!(r.is_ok());
        assert!(r.report().respects(DatasetKind::Synthetic));
        assert!(r.tqmse.is_some() && r.uql.is_some() && r.censdcal.is_some());
        assert_eq!(r.grid_size, 9);
        assert_eq!(r.n_train, 100);
    }
}
