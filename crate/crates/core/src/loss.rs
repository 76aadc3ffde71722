//! Quantile losses and their gradients with respect to network outputs.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::distributions::{normal_log_pdf, normal_log_sf};
use crate::error::{Error, Result};

const LEVEL_TOL: f64 = 1e-9;

/// Strictly increasing quantile levels in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileGrid {
    levels: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Parameter("quantile grid is empty".into()));
        }
        if levels.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Parameter(format!("grid levels must lie in (0,1): {levels:?}")));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(format!("grid levels must be strictly increasing: {levels:?}")));
        }
        Ok(Self { levels })
    }

    /// Levels `k / (m + 1)` for `k = 1..=m`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Parameter("grid size must be positive".into()));
        }
        Self::new((1..=m).map(|k| k as f64 / (m + 1) as f64).collect())
    }

    /// 9 levels for up to 1000 training points, 19 beyond.
    pub fn default_for_size(n_train: usize) -> Self {
        Self::uniform(if n_train <= 1000 { 9 } else { 19 }).expect("valid size")
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn index_of(&self, tau: f64) -> Option<usize> {
        self.levels.iter().position(|&t| (t - tau).abs() < LEVEL_TOL)
    }

    pub fn contains_benchmark_levels(&self) -> bool {
        crate::metrics::BENCHMARK_LEVELS
            .iter()
            .all(|&t| self.index_of(t).is_some())
    }

    /// Errors unless 0.1, 0.5 and 0.9 are all levels.
    pub fn require_benchmark_levels(&self) -> Result<()> {
        if self.contains_benchmark_levels() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "grid {:?} must contain 0.1, 0.5 and 0.9",
                self.levels
            )))
        }
    }
}

impl TryFrom<Vec<f64>> for QuantileGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileGrid> for Vec<f64> {
    fn from(g: QuantileGrid) -> Self {
        g.levels
    }
}

/// Rule for the pseudo label placed above every observation: `c * max(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoValue {
    pub c: f64,
}

impl Default for PseudoValue {
    fn default() -> Self {
        Self { c: 1.2 }
    }
}

impl PseudoValue {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 1.0) {
            return Err(Error::Parameter(format!("pseudo-value multiplier must be >= 1, got {c}")));
        }
        Ok(Self { c })
    }

    pub fn resolve(&self, max_label: f64) -> f64 {
        self.c * max_label
    }
}

/// `(y - ŷ)(τ - 1[ŷ > y])`.
pub fn checkmark(y: f64, y_hat: f64, tau: f64) -> f64 {
    let ind = if y_hat > y { 1.0 } else { 0.0 };
    (y - y_hat) * (tau - ind)
}

/// Derivative of [`checkmark`] in `ŷ`; equals `-τ` at `ŷ == y`.
pub fn checkmark_grad(y: f64, y_hat: f64, tau: f64) -> f64 {
    if y_hat > y {
        1.0 - tau
    } else {
        -tau
    }
}

/// `(τ - q̂)/(1 - q̂)` without the clamp at zero.
pub fn portnoy_weight_raw(tau: f64, q_hat: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q_hat) {
        return Err(Error::Domain(format!("estimated quantile {q_hat} outside [0,1)")));
    }
    Ok((tau - q_hat) / (1.0 - q_hat))
}

/// Weight given to the real censored label; negative raw weights are clamped to 0.
pub fn portnoy_weight(tau: f64, q_hat: f64) -> Result<f64> {
    Ok(portnoy_weight_raw(tau, q_hat)?.max(0.0))
}

/// Estimated quantiles of the censored rows (in row order) and the
/// resulting weight for each grid level.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredWeights {
    pub q_hat: Vec<f64>,
    /// `(n_censored, M)`.
    pub w: Array2<f64>,
}

impl CensoredWeights {
    pub fn from_q_hat(q_hat: Vec<f64>, grid: &QuantileGrid) -> Result<Self> {
        let mut w = Array2::zeros((q_hat.len(), grid.len()));
        for (j, &q) in q_hat.iter().enumerate() {
            for (k, &tau) in grid.levels().iter().enumerate() {
                w[[j, k]] = portnoy_weight(tau, q)?;
            }
        }
        Ok(Self { q_hat, w })
    }

    /// Explicit weights, e.g. unclamped ones for analysis.
    pub fn from_weights(q_hat: Vec<f64>, w: Array2<f64>) -> Result<Self> {
        if w.nrows() != q_hat.len() {
            return Err(Error::Shape("one weight row per censored point required".into()));
        }
        Ok(Self { q_hat, w })
    }

    pub fn empty(m: usize) -> Self {
        Self {
            q_hat: Vec::new(),
            w: Array2::zeros((0, m)),
        }
    }
}

/// `∂/∂ŷ` of the censored-point term `w ρ(y, ŷ) + (1 - w) ρ(y*, ŷ)`:
/// `-τ` below `y`, `w - τ` between `y` and `y*`, `1 - τ` above `y*`.
/// At the kinks the left derivative is used, as for [`checkmark_grad`].
pub fn censored_grad(y: f64, y_hat: f64, tau: f64, w: f64, y_star: f64) -> f64 {
    if y_hat <= y {
        -tau
    } else if y_hat <= y_star {
        w - tau
    } else {
        1.0 - tau
    }
}

fn check_portnoy_inputs(
    y_hat: &ArrayView2<'_, f64>,
    labels: &[f64],
    observed: &[bool],
    grid: &QuantileGrid,
    weights: &CensoredWeights,
    y_star: f64,
) -> Result<()> {
    if y_hat.nrows() != labels.len() || labels.len() != observed.len() || y_hat.ncols() != grid.len() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs {} labels and {} levels",
            y_hat.dim(),
            labels.len(),
            grid.len()
        )));
    }
    let n_cens = observed.iter().filter(|o| !**o).count();
    if weights.w.nrows() != n_cens || weights.w.ncols() != grid.len() {
        return Err(Error::Shape(format!(
            "weights {:?} for {n_cens} censored rows",
            weights.w.dim()
        )));
    }
    if n_cens > 0 {
        let max_y = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if y_star < max_y {
            return Err(Error::Config(format!("pseudo value {y_star} is below max label {max_y}")));
        }
    }
    Ok(())
}

/// Portnoy loss and its gradient, both multiplied by `scale`
/// (`1.0` gives sums; `1/batch` gives means).
pub fn portnoy_loss_and_grad(
    y_hat: ArrayView2<'_, f64>,
    labels: &[f64],
    observed: &[bool],
    grid: &QuantileGrid,
    weights: &CensoredWeights,
    y_star: f64,
    scale: f64,
) -> Result<(f64, Array2<f64>)> {
    check_portnoy_inputs(&y_hat, labels, observed, grid, weights, y_star)?;
    let mut grad = Array2::zeros(y_hat.raw_dim());
    let mut loss = 0.0;
    let mut c = 0;
    for (i, (&y, &obs)) in labels.iter().zip(observed).enumerate() {
        for (k, &tau) in grid.levels().iter().enumerate() {
            let p = y_hat[[i, k]];
            if obs {
                loss += checkmark(y, p, tau);
                grad[[i, k]] = scale * checkmark_grad(y, p, tau);
            } else {
                let w = weights.w[[c, k]];
                loss += w * checkmark(y, p, tau) + (1.0 - w) * checkmark(y_star, p, tau);
                grad[[i, k]] = scale * censored_grad(y, p, tau, w, y_star);
            }
        }
        if !obs {
            c += 1;
        }
    }
    Ok((scale * loss, grad))
}

pub fn portnoy_loss(
    y_hat: ArrayView2<'_, f64>,
    labels: &[f64],
    observed: &[bool],
    grid: &QuantileGrid,
    weights: &CensoredWeights,
    y_star: f64,
) -> Result<f64> {
    Ok(portnoy_loss_and_grad(y_hat, labels, observed, grid, weights, y_star, 1.0)?.0)
}

pub fn portnoy_grad(
    y_hat: ArrayView2<'_, f64>,
    labels: &[f64],
    observed: &[bool],
    grid: &QuantileGrid,
    weights: &CensoredWeights,
    y_star: f64,
) -> Result<Array2<f64>> {
    Ok(portnoy_loss_and_grad(y_hat, labels, observed, grid, weights, y_star, 1.0)?.1)
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Positive scale from the raw network output.
pub fn lognorm_sigma(raw: f64) -> f64 {
    softplus(raw) + 1e-6
}

/// Censored negative log-likelihood of `ln y ~ N(μ, σ²)` with
/// `σ = lognorm_sigma(raw)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogNormNll {
    pub loss: f64,
    pub grad_mu: Vec<f64>,
    pub grad_raw_sigma: Vec<f64>,
}

pub fn lognorm_censored_nll(
    mu: &[f64],
    raw_sigma: &[f64],
    labels: &[f64],
    observed: &[bool],
) -> Result<LogNormNll> {
    let n = labels.len();
    if mu.len() != n || raw_sigma.len() != n || observed.len() != n {
        return Err(Error::Shape("log-normal inputs must have equal length".into()));
    }
    let mut out = LogNormNll {
        loss: 0.0,
        grad_mu: vec![0.0; n],
        grad_raw_sigma: vec![0.0; n],
    };
    for i in 0..n {
        let y = labels[i];
        if y <= 0.0 || y.is_nan() {
            return Err(Error::Data(format!("log-normal likelihood needs y > 0, row {i} has {y}")));
        }
        let ly = y.ln();
        let sigma = lognorm_sigma(raw_sigma[i]);
        let z = (ly - mu[i]) / sigma;
        let (d_mu, d_sigma) = if observed[i] {
            out.loss += ly + sigma.ln() - normal_log_pdf(z);
            (-z / sigma, (1.0 - z * z) / sigma)
        } else {
            out.loss -= normal_log_sf(z);
            let hazard = (normal_log_pdf(z) - normal_log_sf(z)).exp();
            (-hazard / sigma, -hazard * z / sigma)
        };
        out.grad_mu[i] = d_mu;
        out.grad_raw_sigma[i] = d_sigma * sigmoid(raw_sigma[i]);
    }
    Ok(out)
}

/// `Σ_i Σ_j max(0, c - (ŷ_{i,j+1} - ŷ_{i,j}))` and its gradient.
pub fn crossing_penalty(y_hat: ArrayView2<'_, f64>, margin: f64) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(y_hat.raw_dim());
    let mut loss = 0.0;
    for (i, row) in y_hat.rows().into_iter().enumerate() {
        for j in 0..row.len().saturating_sub(1) {
            let h = margin - (row[j + 1] - row[j]);
            if h > 0.0 {
                loss += h;
                grad[[i, j]] += 1.0;
                grad[[i, j + 1]] -= 1.0;
            }
        }
    }
    (loss, grad)
}

/// Log-density of the asymmetric Laplace distribution located at `ŷ` whose
/// scale and asymmetry are set so the log-density is `-ρ_τ + ln(τ - τ²)`.
pub fn asymmetric_laplace_loglik(y: f64, y_hat: f64, tau: f64) -> f64 {
    -checkmark(y, y_hat, tau) + (tau - tau * tau).ln()
}
