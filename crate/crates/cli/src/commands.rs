use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cqrnn_core::algo::{default_epochs, TrainConfig, TrainedQuantileModel};
use cqrnn_core::data::{load_csv, save_csv, CensoredDataset};
use cqrnn_core::harness::{self, Cell, DatasetSource, RunRecord};
use cqrnn_core::loss::{PseudoValue, QuantileGrid};
use cqrnn_core::synthgen::true_quantile_matrix;
use cqrnn_core::{Error, Method, Result, Type1Name};
use ndarray::{concatenate, Array2, Axis};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::output::{
    ensure_dir, level_column, model_file_name, models_dir, read_rows, write_json, write_matrix, write_rows,
    write_text,
};
use crate::{AblateArgs, AblationKind, BenchmarkArgs, GenDataArgs, ReportArgs, TrainArgs, TrainFlags};

const FAN_POINTS: usize = 201;

/// Training settings before the training-set size is known.
#[derive(Debug, Clone, Default)]
struct Template {
    base: TrainConfig,
    epochs: Option<usize>,
    grid: Option<QuantileGrid>,
}

impl Template {
    fn apply(&mut self, f: &TrainFlags) -> Result<()> {
        if let Some(e) = f.epochs {
            self.epochs = Some(e);
        }
        if let Some(b) = f.batch_size {
            self.base.batch_size = b;
        }
        if let Some(m) = f.grid_size {
            self.grid = Some(QuantileGrid::uniform(m)?);
        }
        if let Some(g) = &self.grid {
            g.require_benchmark_levels()?;
        }
        if let Some(lr) = f.lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
            }
            self.base.adam.lr = lr;
        }
        if let Some(c) = f.ystar_multiple {
            self.base.pseudo = PseudoValue::new(c)?;
        }
        if f.dropout {
            self.base.dropout = true;
        }
        if let Some(w) = f.crossing_weight {
            self.base.crossing_weight = w;
        }
        if let Some(r) = f.crossing_rule {
            self.base.crossing_rule = r;
        }
        if self.epochs == Some(0) {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        self.base.validate()
    }

    fn resolve(&self, n_train: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs.unwrap_or_else(|| default_epochs(n_train)),
            grid: self.grid.clone().unwrap_or_else(|| QuantileGrid::default_for_size(n_train)),
            seed,
            ..self.base.clone()
        }
    }

    fn cell(&self, source: DatasetSource, method: Method, seed: u64) -> Cell {
        Cell {
            base: self.base.clone(),
            epochs: self.epochs,
            grid: self.grid.clone(),
            ..Cell::new(source, method, seed)
        }
    }
}

#[derive(Serialize)]
struct GenManifest {
    name: String,
    seed: u64,
    n_train: usize,
    n_test: usize,
    dim: usize,
    censored_fraction_train: f64,
    censored_fraction_test: f64,
    grid: Vec<f64>,
}

pub fn gen_data(a: GenDataArgs) -> Result<()> {
    let name: Type1Name = a.name.parse()?;
    let source = DatasetSource::Synthetic {
        name,
        n_train: a.n_train,
        n_test: a.n_test,
    };
    let (train, test) = source.load(a.seed)?;
    let grid = match a.grid_size {
        Some(m) => QuantileGrid::uniform(m)?,
        None => QuantileGrid::default_for_size(train.len()),
    };
    ensure_dir(&a.out)?;
    save_csv(&train, a.out.join("train.csv"))?;
    save_csv(&test, a.out.join("test.csv"))?;

    let truth = true_quantile_matrix(name, test.features(), grid.levels())?;
    let mut header: Vec<String> = (0..test.dim()).map(|j| format!("x{j}")).collect();
    header.extend(grid.levels().iter().map(|&t| level_column("q_", t)));
    let table = concatenate(Axis(1), &[test.features(), truth.view()]).map_err(|e| Error::Shape(e.to_string()))?;
    write_matrix(&a.out.join("truth.csv"), &header, table.rows().into_iter().map(|r| r.to_vec()))?;

    write_json(
        &a.out.join("manifest.json"),
        &GenManifest {
            name: name.id().to_string(),
            seed: a.seed,
            n_train: train.len(),
            n_test: test.len(),
            dim: train.dim(),
            censored_fraction_train: train.censored_fraction(),
            censored_fraction_test: test.censored_fraction(),
            grid: grid.levels().to_vec(),
        },
    )?;
    println!(
        "{}: {} train / {} test rows, {:.1}% of training rows censored -> {}",
        name.id(),
        train.len(),
        test.len(),
        100.0 * train.censored_fraction(),
        a.out.display()
    );
    Ok(())
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned())
}

fn train_inputs(a: &TrainArgs) -> Result<(String, CensoredDataset, CensoredDataset)> {
    match (&a.dataset, &a.train) {
        (Some(name), None) => {
            let src = DatasetSource::synthetic(name.parse()?);
            let (tr, te) = src.load(a.seed)?;
            Ok((src.id(), tr, te))
        }
        (None, Some(path)) => match &a.test {
            Some(test) => Ok((file_stem(path), load_csv(path, None)?, load_csv(test, None)?)),
            None => {
                let src = DatasetSource::Csv {
                    path: path.clone(),
                    test_fraction: 0.2,
                };
                let (tr, te) = src.load(a.seed)?;
                Ok((src.id(), tr, te))
            }
        },
        _ => Err(Error::Usage("give exactly one of --dataset or --train".into())),
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut t = Template::default();
    t.apply(&a.flags)?;
    let (id, train_ds, test_ds) = train_inputs(&a)?;
    if train_ds.dim() != test_ds.dim() {
        return Err(Error::Schema(format!(
            "train has {} features, test has {}",
            train_ds.dim(),
            test_ds.dim()
        )));
    }
    let cfg = t.resolve(train_ds.len(), a.seed);
    let (record, outcome) = harness::fit_and_evaluate(a.method, &train_ds, &test_ds, &cfg, &id, "")?;
    ensure_dir(&a.out)?;
    outcome.model.save(a.out.join("model.json"))?;
    write_rows(&a.out.join("loss_log.csv"), &outcome.log)?;
    write_rows(&a.out.join("metrics.csv"), std::slice::from_ref(&record))?;
    let metrics: Vec<String> = cqrnn_core::MetricReport::METRIC_NAMES
        .iter()
        .filter_map(|m| record.report().metric(m).map(|v| format!("{m}={v:.4}")))
        .collect();
    println!(
        "{} on {id} (seed {}, {} epochs, {} levels): {}",
        a.method,
        a.seed,
        cfg.epochs,
        cfg.grid.len(),
        metrics.join(" ")
    );
    Ok(())
}

fn worker_threads(flag: Option<usize>) -> Result<usize> {
    match flag {
        Some(0) => Err(Error::Config("workers must be at least 1".into())),
        Some(w) => Ok(w),
        None => Ok(harness::worker_count()),
    }
}

fn progress(r: &RunRecord) {
    let variant = if r.variant.is_empty() { String::new() } else { format!(" [{}]", r.variant) };
    eprintln!("{} {}{} seed {}: {}", r.dataset, r.method, variant, r.seed, r.status);
}

fn write_summaries(dir: &Path, stem: &str, records: &[RunRecord]) -> Result<String> {
    let rows = harness::summarize(records);
    write_rows(&dir.join(format!("{stem}.csv")), &rows)?;
    let md = harness::summary_markdown(&rows);
    write_text(&dir.join(format!("{stem}.md")), &md)?;
    Ok(md)
}

pub fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let m = RunManifest::load(&a.manifest)?;
    let sources = m.sources()?;
    let methods = m.all_methods()?;
    let seeds = a.seeds.clone().unwrap_or_else(|| m.seeds.clone());
    RunManifest::validate_seeds(&seeds)?;
    let (base, epochs, grid) = m.template()?;
    let mut t = Template { base, epochs, grid };
    t.apply(&a.flags)?;
    let workers = worker_threads(a.workers)?;
    let out = a.out.clone().or_else(|| m.output_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"));

    let mut by_id = BTreeMap::new();
    for s in &sources {
        if by_id.insert(s.id(), s.clone()).is_some() {
            return Err(Error::Config(format!("two datasets share the id `{}`", s.id())));
        }
    }
    let mut cells = Vec::new();
    for s in &sources {
        for &meth in &methods {
            for &seed in &seeds {
                cells.push(t.cell(s.clone(), meth, seed));
            }
        }
    }

    let models = models_dir(&out);
    ensure_dir(&models)?;
    write_json(&out.join("sources.json"), &by_id)?;
    let records = harness::run_cells_with(&cells, workers, |_, done| {
        if let Some(o) = &done.outcome {
            let r = &done.record;
            o.model.save(models.join(model_file_name(&r.dataset, &r.method, &r.variant, r.seed)))?;
        }
        progress(&done.record);
        Ok(done.record)
    })?;
    write_rows(&out.join("runs.csv"), &records)?;
    let md = write_summaries(&out, "summary", &records)?;
    print!("{md}");
    Ok(())
}

fn parse_names(names: &Option<Vec<String>>, default: &[Type1Name]) -> Result<Vec<Type1Name>> {
    match names {
        None => Ok(default.to_vec()),
        Some(v) if v.is_empty() => Err(Error::Usage("empty dataset list".into())),
        Some(v) => v.iter().map(|n| n.parse()).collect(),
    }
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    RunManifest::validate_seeds(&a.seeds)?;
    let workers = worker_threads(a.workers)?;
    let misplaced = match a.kind {
        AblationKind::Grid => a.multiples.is_some().then_some("--multiples"),
        AblationKind::Ystar => (a.grid_sizes.is_some() || a.train_sizes.is_some()).then_some("--grid-sizes/--train-sizes"),
        AblationKind::Crossing => (a.multiples.is_some() || a.grid_sizes.is_some() || a.train_sizes.is_some())
            .then_some("--multiples/--grid-sizes/--train-sizes"),
    };
    if let Some(flag) = misplaced {
        return Err(Error::Usage(format!("{flag} does not apply to this sweep")));
    }
    let (stem, names) = match a.kind {
        AblationKind::Grid => ("ablate_grid", parse_names(&a.datasets, &Type1Name::ONE_D)?),
        AblationKind::Ystar => (
            "ablate_ystar",
            parse_names(
                &a.datasets,
                &[
                    Type1Name::NormHeavy,
                    Type1Name::NormLight,
                    Type1Name::LogNormHeavy,
                    Type1Name::LogNormLight,
                ],
            )?,
        ),
        AblationKind::Crossing => ("ablate_crossing", parse_names(&a.datasets, &Type1Name::ONE_D)?),
    };
    let mut cells = Vec::new();
    for name in names {
        match a.kind {
            AblationKind::Grid => cells.extend(harness::grid_ablation_cells(
                name,
                a.grid_sizes.as_deref().unwrap_or(&harness::ABLATION_GRID_SIZES),
                a.train_sizes.as_deref().unwrap_or(&harness::ABLATION_TRAIN_SIZES),
                &a.seeds,
            )?),
            AblationKind::Ystar => cells.extend(harness::ystar_ablation_cells(
                name,
                a.multiples.as_deref().unwrap_or(&harness::ABLATION_YSTAR),
                &a.seeds,
            )?),
            AblationKind::Crossing => cells.extend(harness::crossing_ablation_cells(name, &a.seeds)),
        }
    }
    ensure_dir(&a.out)?;
    let records = harness::run_cells_with(&cells, workers, |_, done| {
        progress(&done.record);
        Ok(done.record)
    })?;
    write_rows(&a.out.join(format!("{stem}.csv")), &records)?;
    let md = write_summaries(&a.out, &format!("{stem}_summary"), &records)?;
    print!("{md}");
    Ok(())
}

fn fan_table(name: Type1Name, model: &TrainedQuantileModel) -> Result<(Vec<String>, Array2<f64>)> {
    let x = Array2::from_shape_fn((FAN_POINTS, 1), |(i, _)| 2.0 * i as f64 / (FAN_POINTS - 1) as f64);
    let levels = model.grid.levels();
    let pred = model.predict(x.view())?;
    let truth = true_quantile_matrix(name, x.view(), levels)?;
    let mut header = vec!["x".to_string()];
    header.extend(levels.iter().map(|&t| level_column("pred_q", t)));
    header.extend(levels.iter().map(|&t| level_column("true_q", t)));
    let table = concatenate(Axis(1), &[x.view(), pred.view(), truth.view()]).map_err(|e| Error::Shape(e.to_string()))?;
    Ok((header, table))
}

pub fn report(a: ReportArgs) -> Result<()> {
    let runs: Vec<RunRecord> = read_rows(&a.runs_dir.join("runs.csv"))?;
    let sources_path = a.runs_dir.join("sources.json");
    let text = std::fs::read_to_string(&sources_path).map_err(|e| Error::io(&sources_path, e))?;
    let sources: BTreeMap<String, DatasetSource> = serde_json::from_str(&text)?;
    let out = a.out.clone().unwrap_or_else(|| a.runs_dir.join("report"));
    ensure_dir(&out)?;

    let mut pairs: Vec<(String, String)> = Vec::new();
    for r in &runs {
        let key = (r.dataset.clone(), r.method.clone());
        if !pairs.contains(&key) {
            pairs.push(key);
        }
    }
    let mut fans = Vec::new();
    let mut notes = Vec::new();
    let mut missing = Vec::new();
    for (dataset, method) in &pairs {
        let name = match sources.get(dataset) {
            Some(DatasetSource::Synthetic { name, .. }) if name.dim() == 1 => *name,
            Some(DatasetSource::Synthetic { .. }) => {
                notes.push(format!("{dataset}/{method}: more than one feature, no fan plot"));
                continue;
            }
            _ => {
                notes.push(format!("{dataset}/{method}: no analytic quantiles, no fan plot"));
                continue;
            }
        };
        let Some(rec) = runs
            .iter()
            .filter(|r| r.is_ok() && &r.dataset == dataset && &r.method == method)
            .min_by_key(|r| r.seed)
        else {
            notes.push(format!("{dataset}/{method}: no successful run"));
            continue;
        };
        let path = models_dir(&a.runs_dir).join(model_file_name(dataset, method, &rec.variant, rec.seed));
        if !path.exists() {
            missing.push(path.display().to_string());
            continue;
        }
        let model = TrainedQuantileModel::load(&path)?;
        let (header, table) = fan_table(name, &model)?;
        let file = format!("fan__{dataset}__{method}.csv");
        write_matrix(&out.join(&file), &header, table.rows().into_iter().map(|r| r.to_vec()))?;
        fans.push(format!("{file} (seed {})", rec.seed));
    }

    let mut md = String::from("# Benchmark summary\n\n");
    md.push_str(&harness::summary_markdown(&harness::summarize(&runs)));
    let section = |md: &mut String, title: &str, items: &[String]| {
        if !items.is_empty() {
            md.push_str(&format!("\n## {title}\n\n"));
            for i in items {
                md.push_str(&format!("- {i}\n"));
            }
        }
    };
    section(&mut md, "Quantile fans", &fans);
    section(&mut md, "Notes", &notes);
    section(&mut md, "Missing checkpoints", &missing);
    write_text(&out.join("summary.md"), &md)?;
    for n in &notes {
        eprintln!("note: {n}");
    }
    for m in &missing {
        eprintln!("missing checkpoint: {m}");
    }
    println!("report written to {}", out.display());
    if a.strict && !missing.is_empty() {
        return Err(Error::Data(format!("{} checkpoint(s) missing", missing.len())));
    }
    Ok(())
}
