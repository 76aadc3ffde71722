//! The fourteen synthetic benchmark generators (synthetic targets with
//! synthetic censoring) and the uniform censoring overlay used to turn an
//! uncensored real dataset into a censored one.
//!
//! Inputs are drawn from `U(0,2)^D`. Every generator exposes its analytic
//! conditional quantile through [`true_quantile`].

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::CensoredDataset;
use crate::distributions::DistSpec;
use crate::error::{Error, Result};
use crate::seed::{self, tags};

/// Coefficients of the linear log-mean in the 8-feature log-normal datasets.
pub const LOGNORM8_BETA: [f64; 8] = [0.2, 0.3, -0.1, 0.4, -0.2, 0.1, 0.3, -0.3];

const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Type1Name {
    NormLinear,
    NormNonlinear,
    Exponential,
    Weibull,
    #[serde(rename = "lognorm")]
    LogNorm,
    NormUniform,
    NormHeavy,
    NormMed,
    NormLight,
    NormSame,
    #[serde(rename = "lognorm_heavy")]
    LogNormHeavy,
    #[serde(rename = "lognorm_med")]
    LogNormMed,
    #[serde(rename = "lognorm_light")]
    LogNormLight,
    #[serde(rename = "lognorm_same")]
    LogNormSame,
}

/// Censoring distribution of a generator at a given input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CensorDist {
    Dist(DistSpec),
    SameAsTarget,
}

impl Type1Name {
    pub const ALL: [Type1Name; 14] = [
        Type1Name::NormLinear,
        Type1Name::NormNonlinear,
        Type1Name::Exponential,
        Type1Name::Weibull,
        Type1Name::LogNorm,
        Type1Name::NormUniform,
        Type1Name::NormHeavy,
        Type1Name::NormMed,
        Type1Name::NormLight,
        Type1Name::NormSame,
        Type1Name::LogNormHeavy,
        Type1Name::LogNormMed,
        Type1Name::LogNormLight,
        Type1Name::LogNormSame,
    ];

    /// The six single-feature datasets.
    pub const ONE_D: [Type1Name; 6] = [
        Type1Name::NormLinear,
        Type1Name::NormNonlinear,
        Type1Name::Exponential,
        Type1Name::Weibull,
        Type1Name::LogNorm,
        Type1Name::NormUniform,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Type1Name::NormLinear => "norm_linear",
            Type1Name::NormNonlinear => "norm_nonlinear",
            Type1Name::Exponential => "exponential",
            Type1Name::Weibull => "weibull",
            Type1Name::LogNorm => "lognorm",
            Type1Name::NormUniform => "norm_uniform",
            Type1Name::NormHeavy => "norm_heavy",
            Type1Name::NormMed => "norm_med",
            Type1Name::NormLight => "norm_light",
            Type1Name::NormSame => "norm_same",
            Type1Name::LogNormHeavy => "lognorm_heavy",
            Type1Name::LogNormMed => "lognorm_med",
            Type1Name::LogNormLight => "lognorm_light",
            Type1Name::LogNormSame => "lognorm_same",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Type1Name::NormLinear => "Norm linear",
            Type1Name::NormNonlinear => "Norm non-linear",
            Type1Name::Exponential => "Exponential",
            Type1Name::Weibull => "Weibull",
            Type1Name::LogNorm => "LogNorm",
            Type1Name::NormUniform => "Norm uniform",
            Type1Name::NormHeavy => "Norm heavy",
            Type1Name::NormMed => "Norm med.",
            Type1Name::NormLight => "Norm light",
            Type1Name::NormSame => "Norm same",
            Type1Name::LogNormHeavy => "LogNorm heavy",
            Type1Name::LogNormMed => "LogNorm med.",
            Type1Name::LogNormLight => "LogNorm light",
            Type1Name::LogNormSame => "LogNorm same",
        }
    }

    pub fn dim(self) -> usize {
        use Type1Name::*;
        match self {
            NormLinear | NormNonlinear | Exponential | Weibull | LogNorm | NormUniform => 1,
            NormHeavy | NormMed | NormLight | NormSame => 4,
            LogNormHeavy | LogNormMed | LogNormLight | LogNormSame => 8,
        }
    }

    /// Default `(n_train, n_test)`.
    pub fn default_sizes(self) -> (usize, usize) {
        match self.dim() {
            1 => (500, 1000),
            4 => (2000, 1000),
            _ => (4000, 1000),
        }
    }

    /// Censored proportion listed for the generator in the dataset summary
    /// table; a diagnostic, not a calibration target.
    pub fn reference_censored_fraction(self) -> f64 {
        use Type1Name::*;
        match self {
            NormLinear => 0.20,
            NormNonlinear => 0.24,
            Exponential => 0.30,
            Weibull => 0.22,
            LogNorm => 0.21,
            NormUniform => 0.62,
            NormHeavy => 0.80,
            NormMed => 0.49,
            NormLight => 0.25,
            NormSame => 0.50,
            LogNormHeavy => 0.75,
            LogNormMed => 0.52,
            LogNormLight => 0.23,
            LogNormSame => 0.50,
        }
    }

    /// Target distribution `p_t(t | x)`.
    pub fn target(self, x: &[f64]) -> Result<DistSpec> {
        use Type1Name::*;
        self.check_dim(x)?;
        match self {
            NormLinear => {
                let v = x[0];
                DistSpec::normal(2.0 * v + 10.0, v + 1.0)
            }
            NormNonlinear => {
                let v = x[0];
                DistSpec::normal(v * (2.0 * v).sin() + 10.0, 0.5 * v + 0.5)
            }
            Exponential => DistSpec::exponential(2.0 * x[0] + 4.0),
            Weibull => {
                let v = x[0];
                DistSpec::weibull(4.0 * v * (2.0 * (v - 1.0)).sin() + 10.0, 5.0)
            }
            LogNorm => {
                let v = x[0];
                DistSpec::log_normal((v - 1.0).powi(2), (v * v).max(SIGMA_FLOOR))
            }
            NormUniform => {
                let v = x[0];
                DistSpec::normal(2.0 * v * (2.0 * v).cos() + 13.0, v * v + 0.5)
            }
            NormHeavy | NormMed | NormLight | NormSame => {
                let mean = 3.0 * x[0] + x[1] * x[1] - x[2] * x[2] + 2.0 * (x[2] * x[3]).sin() + 6.0;
                DistSpec::normal(mean, x[0] * x[0] + 0.5)
            }
            LogNormHeavy | LogNormMed | LogNormLight | LogNormSame => {
                let lin: f64 = LOGNORM8_BETA.iter().zip(x).map(|(b, v)| b * v).sum();
                // exp(N(lin, 1)) / 10 is log-normal with log-mean lin - ln 10.
                DistSpec::log_normal(lin - std::f64::consts::LN_10, 1.0)
            }
        }
    }

    /// Censoring distribution `p_c(c | x)`.
    pub fn censoring(self, x: &[f64]) -> Result<CensorDist> {
        use Type1Name::*;
        self.check_dim(x)?;
        let d = match self {
            NormLinear => DistSpec::normal(4.0 * x[0] + 10.0, 0.8 * x[0] + 0.4)?,
            NormNonlinear => DistSpec::normal(2.0 * x[0] + 10.0, 2.0)?,
            Exponential => DistSpec::exponential(-3.0 * x[0] + 15.0)?,
            Weibull => DistSpec::weibull(-3.0 * x[0] + 20.0, 5.0)?,
            LogNorm => DistSpec::uniform(0.0, 10.0)?,
            NormUniform => DistSpec::uniform(0.0, 18.0)?,
            NormHeavy => DistSpec::uniform(0.0, 12.0)?,
            NormMed => DistSpec::uniform(0.0, 20.0)?,
            NormLight => DistSpec::uniform(0.0, 40.0)?,
            LogNormHeavy => DistSpec::uniform(0.0, 0.4)?,
            LogNormMed => DistSpec::uniform(0.0, 1.0)?,
            LogNormLight => DistSpec::uniform(0.0, 3.5)?,
            NormSame | LogNormSame => return Ok(CensorDist::SameAsTarget),
        };
        Ok(CensorDist::Dist(d))
    }

    fn check_dim(self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "{} takes {} features, got {}",
                self.id(),
                self.dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite input".into()));
        }
        Ok(())
    }
}

impl fmt::Display for Type1Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Type1Name {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let key = key.trim_end_matches('.');
        Type1Name::ALL
            .into_iter()
            .find(|n| {
                n.id() == key
                    || n.label().to_ascii_lowercase().replace(['-', ' '], "_").trim_end_matches('.') == key
            })
            .or(match key {
                "norm_non_linear" => Some(Type1Name::NormNonlinear),
                "norm_medium" => Some(Type1Name::NormMed),
                "lognorm_medium" => Some(Type1Name::LogNormMed),
                _ => None,
            })
            .ok_or_else(|| Error::UnknownDataset(s.to_string()))
    }
}

/// Whether the generator's censoring is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorMode {
    #[default]
    Generator,
    /// Censoring time is `+inf`; every label is observed.
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Type1Spec {
    pub name: Type1Name,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub censoring: CensorMode,
}

impl Type1Spec {
    pub fn new(name: Type1Name) -> Self {
        let (n_train, n_test) = name.default_sizes();
        Self {
            name,
            n_train,
            n_test,
            censoring: CensorMode::Generator,
        }
    }

    pub fn with_sizes(mut self, n_train: usize, n_test: usize) -> Self {
        self.n_train = n_train;
        self.n_test = n_test;
        self
    }

    pub fn dim(&self) -> usize {
        self.name.dim()
    }

    /// `n` rows drawn with inputs, targets and censoring times taken from
    /// three independent streams of `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<CensoredDataset> {
        if n == 0 {
            return Err(Error::Size("cannot generate an empty dataset".into()));
        }
        let d = self.dim();
        let mut x_rng = seed::stream(seed, tags::INPUTS);
        let mut t_rng = seed::stream(seed, tags::TARGETS);
        let mut c_rng = seed::stream(seed, tags::CENSORING);

        let features = Array2::from_shape_simple_fn((n, d), || 2.0 * x_rng.random::<f64>());
        let mut labels = Vec::with_capacity(n);
        let mut observed = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for row in features.rows() {
            let x = row.as_slice().expect("row-major");
            let target = self.name.target(x)?;
            let t = target.sample_unchecked(&mut t_rng);
            let c = match self.censoring {
                CensorMode::Never => f64::INFINITY,
                CensorMode::Generator => match self.name.censoring(x)? {
                    CensorDist::Dist(cd) => cd.sample_unchecked(&mut c_rng),
                    CensorDist::SameAsTarget => target.sample_unchecked(&mut c_rng),
                },
            };
            // Ties count as observed: censoring needs c < t strictly.
            let obs = t <= c;
            labels.push(if obs { t } else { c });
            observed.push(obs);
            targets.push(t);
        }
        Ok(CensoredDataset::new(features, labels, observed)?
            .with_true_targets(targets)?
            .with_truth(self.name))
    }

    /// Independent train and test sets for one seed.
    pub fn generate_train_test(&self, seed: u64) -> Result<(CensoredDataset, CensoredDataset)> {
        let train = self.generate(self.n_train, seed::derive(seed, tags::DATA_TRAIN))?;
        let test = self.generate(self.n_test, seed::derive(seed, tags::DATA_TEST))?;
        Ok((train, test))
    }
}

/// The analytic `tau`-quantile of the generator's target at `x`.
pub fn true_quantile(name: Type1Name, x: &[f64], tau: f64) -> Result<f64> {
    name.target(x)?.quantile(tau)
}

/// Analytic quantiles for every row of `x` at every level: `N × levels`.
pub fn true_quantile_matrix(name: Type1Name, x: ndarray::ArrayView2<'_, f64>, levels: &[f64]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((x.nrows(), levels.len()));
    for (i, row) in x.rows().into_iter().enumerate() {
        let spec = name.target(&row.to_vec())?;
        for (j, &tau) in levels.iter().enumerate() {
            out[[i, j]] = spec.quantile(tau)?;
        }
    }
    Ok(out)
}

/// How the upper bound `c` of a `U(0, c)` censoring overlay is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorBound {
    Fixed(f64),
    /// `c = m * max_i y_i`.
    MultipleOfMax(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensorOverlay {
    pub bound: CensorBound,
}

impl CensorOverlay {
    pub fn fixed(c: f64) -> Self {
        Self {
            bound: CensorBound::Fixed(c),
        }
    }

    pub fn multiple_of_max(m: f64) -> Self {
        Self {
            bound: CensorBound::MultipleOfMax(m),
        }
    }

    pub fn resolve(&self, labels: &[f64]) -> Result<f64> {
        let c = match self.bound {
            CensorBound::Fixed(c) => c,
            CensorBound::MultipleOfMax(m) => m * labels.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        if c.is_finite() && c > 0.0 {
            Ok(c)
        } else {
            Err(Error::Parameter(format!("censoring bound must be > 0, got {c}")))
        }
    }
}

/// Applies `c_i ~ U(0, c)` censoring to a fully observed dataset. The
/// original labels are kept as the true targets.
pub fn overlay_censoring(uncensored: &CensoredDataset, ov: &CensorOverlay, seed: u64) -> Result<CensoredDataset> {
    if let Some(i) = uncensored.observed().iter().position(|&o| !o) {
        return Err(Error::Validation(format!(
            "censoring overlay needs uncensored input; row {} is censored",
            i + 1
        )));
    }
    let c = ov.resolve(uncensored.labels())?;
    let mut rng = seed::stream(seed, tags::OVERLAY);
    let truth = uncensored.truth();
    let (features, targets, _, _) = uncensored.clone().into_parts();
    let mut labels = Vec::with_capacity(targets.len());
    let mut observed = Vec::with_capacity(targets.len());
    for &t in &targets {
        let ci = c * rng.random::<f64>();
        let obs = t <= ci;
        labels.push(if obs { t } else { ci });
        observed.push(obs);
    }
    let ds = CensoredDataset::new(features, labels, observed)?.with_true_targets(targets)?;
    Ok(match truth {
        Some(name) => ds.with_truth(name),
        None => ds,
    })
}
