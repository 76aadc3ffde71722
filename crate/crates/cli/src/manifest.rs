//! Benchmark manifest: which datasets, methods and seeds to run, plus
//! training overrides.
//!
//! ```json
//! {
//!   "datasets": ["norm_linear", {"type": "csv", "path": "surv.csv"}],
//!   "methods": ["cqrnn", "excl"],
//!   "seeds": [0, 1, 2],
//!   "epochs": 50,
//!   "config": {"batch_size": 64},
//!   "output_dir": "runs"
//! }
//! ```
//!
//! `dataset` / `method` may be given instead of the list forms. Relative CSV
//! paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use cqrnn_core::algo::{Method, TrainConfig};
use cqrnn_core::harness::DatasetSource;
use cqrnn_core::{Error, QuantileGrid, Result, Type1Name};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Name(String),
    Source(DatasetSource),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default)]
    pub dataset: Option<DatasetRef>,
    #[serde(default)]
    pub datasets: Vec<DatasetRef>,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub grid_size: Option<usize>,
    /// Partial [`TrainConfig`]; only the keys given override the defaults.
    #[serde(default)]
    pub config: Option<serde_json::Value>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve_paths(base)
    }

    fn resolve_paths(mut self, base: &Path) -> Result<Self> {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in self.dataset.iter_mut().chain(self.datasets.iter_mut()) {
            if let DatasetRef::Source(DatasetSource::Csv { path, .. } | DatasetSource::CensorOverlay { path, .. }) = d {
                fix(path);
            }
        }
        if let Some(o) = self.output_dir.as_mut() {
            fix(o);
        }
        Ok(self)
    }

    pub fn sources(&self) -> Result<Vec<DatasetSource>> {
        let refs: Vec<&DatasetRef> = self.dataset.iter().chain(&self.datasets).collect();
        if refs.is_empty() {
            return Err(Error::Config("manifest names no dataset".into()));
        }
        refs.into_iter()
            .map(|r| match r {
                DatasetRef::Name(n) => Ok(DatasetSource::synthetic(n.parse::<Type1Name>()?)),
                DatasetRef::Source(s) => Ok(s.clone()),
            })
            .collect()
    }

    pub fn all_methods(&self) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = self.method.iter().copied().chain(self.methods.iter().copied()).collect();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("manifest names no method".into()));
        }
        Ok(out)
    }

    /// Base config plus the epoch count and grid the manifest pins, if any;
    /// unpinned values stay size-dependent.
    pub fn template(&self) -> Result<(TrainConfig, Option<usize>, Option<QuantileGrid>)> {
        let (base, mut epochs, mut grid) = match &self.config {
            None => (TrainConfig::default(), None, None),
            Some(v) => {
                if !v.is_object() {
                    return Err(Error::Config("`config` must be a JSON object".into()));
                }
                let base: TrainConfig =
                    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("config: {e}")))?;
                let epochs = v.get("epochs").map(|_| base.epochs);
                let grid = v.get("grid").map(|_| base.grid.clone());
                (base, epochs, grid)
            }
        };
        if let Some(e) = self.epochs {
            epochs = Some(e);
        }
        if let Some(m) = self.grid_size {
            grid = Some(QuantileGrid::uniform(m)?);
        }
        base.validate()?;
        Ok((base, epochs, grid))
    }

    pub fn validate_seeds(seeds: &[u64]) -> Result<()> {
        if seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        let mut seen = HashSet::new();
        if let Some(s) = seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::Config(format!("seed {s} is listed twice")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_and_single_forms() {
        let m: RunManifest = serde_json::from_str(
            r#"{"dataset": "norm_linear", "methods": ["cqrnn", "excl"], "seeds": [1, 2]}"#,
        )
        .unwrap();
        assert_eq!(m.sources().unwrap().len(), 1);
        assert_eq!(m.all_methods().unwrap(), vec![Method::Cqrnn, Method::Excl]);
        assert_eq!(m.seeds, vec![1, 2]);
        let m: RunManifest = serde_json::from_str(
            r#"{"datasets": [{"type": "csv", "path": "a.csv"}], "method": "lognorm"}"#,
        )
        .unwrap();
        let m = m.resolve_paths(Path::new("/data")).unwrap();
        match &m.sources().unwrap()[0] {
            DatasetSource::Csv { path, .. } => assert_eq!(path, Path::new("/data/a.csv")),
            other => panic!("{other:?}"),
        }
        assert_eq!(m.seeds.len(), 10);
    }

    #[test]
    fn rejects_bad_manifests() {
        assert!(serde_json::from_str::<RunManifest>(r#"{"method": "bogus"}"#).is_err());
        assert!(serde_json::from_str::<RunManifest>(r#"{"methd": "cqrnn"}"#).is_err());
        let m: RunManifest = serde_json::from_str(r#"{"dataset": "nope", "method": "cqrnn"}"#).unwrap();
        assert!(matches!(m.sources(), Err(Error::UnknownDataset(_))));
        assert!(RunManifest::validate_seeds(&[1, 1]).is_err());
        assert!(RunManifest::validate_seeds(&[]).is_err());
        let m: RunManifest = serde_json::from_str(r#"{"method": "cqrnn", "config": [1]}"#).unwrap();
        assert!(m.template().is_err());
    }

    #[test]
    fn template_pins_only_given_keys() {
        let m: RunManifest =
            serde_json::from_str(r#"{"method": "cqrnn", "config": {"batch_size": 32}}"#).unwrap();
        let (base, epochs, grid) = m.template().unwrap();
        assert_eq!(base.batch_size, 32);
        assert!(epochs.is_none() && grid.is_none());
        let m: RunManifest = serde_json::from_str(
            r#"{"method": "cqrnn", "grid_size": 3, "config": {"epochs": 7, "grid": [0.2, 0.8]}}"#,
        )
        .unwrap();
        let (_, epochs, grid) = m.template().unwrap();
        assert_eq!(epochs, Some(7));
        assert_eq!(grid.unwrap().len(), 3);
    }
}
