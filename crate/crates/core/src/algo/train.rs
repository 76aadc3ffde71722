use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{hard_e, CrossingRule, Method, Network, TrainConfig, TrainedQuantileModel};
use crate::data::{CensoredDataset, Standardizer};
use crate::error::{Error, Result};
use crate::loss::{crossing_penalty, lognorm_censored_nll, portnoy_loss_and_grad, CensoredWeights, QuantileGrid};
use crate::nn::{AdamState, MlpModel, Mode, NetConfig};
use crate::seed::{self, tags};

/// Mean training loss over one epoch and the learning rate of its last step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedQuantileModel,
    pub log: Vec<EpochLog>,
    pub steps: usize,
}

/// Where censored weights come from during a fit.
enum Weighting<'a> {
    /// Recompute `q̂` from each minibatch's own outputs.
    HardE,
    /// Fixed `q̂` per row (entries for observed rows are ignored).
    Fixed(&'a [f64]),
}

fn net_config(cfg: &TrainConfig, input_dim: usize, n_outputs: usize) -> NetConfig {
    NetConfig {
        input_dim,
        hidden_sizes: cfg.hidden_sizes.clone(),
        activation: cfg.activation,
        n_outputs,
        dropout_enabled: cfg.dropout,
        dropout_rate: cfg.dropout_rate,
        head: cfg.head,
    }
}

/// Generic minibatch loop. `batch_loss` returns the (mean) loss of a batch
/// and its gradient with respect to the network outputs.
fn run_epochs<F>(
    model: &mut MlpModel,
    x: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
    seed: u64,
    log: &mut Vec<EpochLog>,
    steps: &mut usize,
    mut batch_loss: F,
) -> Result<()>
where
    F: FnMut(&Array2<f64>, &[usize]) -> Result<(f64, Array2<f64>)>,
{
    let n = x.nrows();
    let per_epoch = n.div_ceil(cfg.batch_size);
    let total = per_epoch * cfg.epochs;
    let mut adam = AdamState::new(model, cfg.adam.clone());
    let mut shuffle_rng = seed::stream(seed, tags::SHUFFLE);
    let mut dropout_rng = seed::stream(seed, tags::DROPOUT);
    let mut order: Vec<usize> = (0..n).collect();
    let epoch_offset = log.len();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        let mut lr = adam.current_lr(total);
        for idx in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), idx);
            let (out, cache) = model.forward(xb.view(), Mode::Train, &mut dropout_rng)?;
            let (loss, grad) = batch_loss(&out, idx)?;
            if !loss.is_finite() {
                return Err(Error::Numeric {
                    step: adam.steps_taken() + 1,
                    msg: format!("non-finite loss in epoch {}", epoch + 1),
                });
            }
            let grads = model.backward(&cache, grad.view())?;
            lr = adam.current_lr(total);
            adam.step(model, &grads, total)?;
            sum += loss * idx.len() as f64;
        }
        log.push(EpochLog {
            epoch: epoch_offset + epoch + 1,
            loss: sum / n as f64,
            lr,
        });
    }
    *steps += adam.steps_taken();
    Ok(())
}

/// Fits a network with one head per level of `grid` on the Portnoy loss.
#[allow(clippy::too_many_arguments)]
fn fit_portnoy(
    x: ArrayView2<'_, f64>,
    labels: &[f64],
    observed: &[bool],
    grid: &QuantileGrid,
    weighting: Weighting<'_>,
    y_star: f64,
    cfg: &TrainConfig,
    seed: u64,
    log: &mut Vec<EpochLog>,
    steps: &mut usize,
) -> Result<MlpModel> {
    let mut model = MlpModel::init(net_config(cfg, x.ncols(), grid.len()), seed)?;
    let mut yb = Vec::with_capacity(cfg.batch_size);
    let mut ob = Vec::with_capacity(cfg.batch_size);
    run_epochs(&mut model, x, cfg, seed, log, steps, |out, idx| {
        yb.clear();
        ob.clear();
        let mut q_hat = Vec::new();
        for (r, &i) in idx.iter().enumerate() {
            yb.push(labels[i]);
            ob.push(observed[i]);
            if !observed[i] {
                q_hat.push(match weighting {
                    Weighting::HardE => hard_e(out.row(r), labels[i], grid, cfg.hard_e),
                    Weighting::Fixed(q) => q[i],
                });
            }
        }
        let weights = if q_hat.is_empty() {
            CensoredWeights::empty(grid.len())
        } else {
            CensoredWeights::from_q_hat(q_hat, grid)?
        };
        let scale = 1.0 / idx.len() as f64;
        let (mut loss, mut grad) = portnoy_loss_and_grad(out.view(), &yb, &ob, grid, &weights, y_star, scale)?;
        if cfg.crossing_weight > 0.0 {
            let (pen, pg) = crossing_penalty(out.view(), cfg.crossing_margin);
            let k = cfg.crossing_weight * scale;
            loss += k * pen;
            grad.scaled_add(k, &pg);
        }
        Ok((loss, grad))
    })?;
    Ok(model)
}

struct Prepared {
    x: Array2<f64>,
    standardizer: Option<Standardizer>,
}

fn prepare(ds: &CensoredDataset, cfg: &TrainConfig) -> Result<Prepared> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if cfg.standardize {
        let s = Standardizer::fit(ds);
        Ok(Prepared {
            x: s.transform(ds.features())?,
            standardizer: Some(s),
        })
    } else {
        Ok(Prepared {
            x: ds.features().to_owned(),
            standardizer: None,
        })
    }
}

fn multi_head(
    method: Method,
    ds: &CensoredDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let p = prepare(ds, cfg)?;
    let y_star = cfg.pseudo.resolve(ds.max_label());
    let mut log = Vec::new();
    let mut steps = 0;
    let net = fit_portnoy(
        p.x.view(),
        ds.labels(),
        ds.observed(),
        &cfg.grid,
        Weighting::HardE,
        y_star,
        cfg,
        cfg.seed,
        &mut log,
        &mut steps,
    )?;
    Ok(TrainOutcome {
        model: TrainedQuantileModel {
            method,
            grid: cfg.grid.clone(),
            standardizer: p.standardizer,
            y_star: Some(y_star),
            network: Network::Multi(net),
        },
        log,
        steps,
    })
}

/// One multi-head network; censored weights come from a hard-E step on each
/// minibatch's outputs.
pub fn train_cqrnn(ds: &CensoredDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    multi_head(Method::Cqrnn, ds, cfg)
}

/// Drops censored rows and fits the checkmark loss on the rest.
pub fn train_excl_censor(ds: &CensoredDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let obs = ds.observed_only();
    if obs.is_empty() {
        return Err(Error::Data("every training row is censored".into()));
    }
    multi_head(Method::Excl, &obs, cfg)
}

/// One single-output network per level, trained in grid order with censored
/// weights updated from crossings between consecutive levels.
pub fn train_sequential_grid(ds: &CensoredDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let p = prepare(ds, cfg)?;
    let levels = cfg.grid.levels();
    let labels = ds.labels();
    let observed = ds.observed();
    let y_star = cfg.pseudo.resolve(ds.max_label());
    let mut log = Vec::new();
    let mut steps = 0;

    let mut q_hat = vec![0.0; ds.len()];
    let mut crossed = vec![false; ds.len()];
    let mut nets: Vec<MlpModel> = Vec::with_capacity(levels.len());
    let mut prev_pred: Option<Vec<f64>> = None;
    let mut cur_pred: Option<Vec<f64>> = None;

    for (i, &tau) in levels.iter().enumerate() {
        if let Some(cur) = &cur_pred {
            if !labels.iter().zip(observed).zip(cur).any(|((&y, &o), &p)| o && y > p) {
                break;
            }
            let last_tau = levels[i - 1];
            for j in (0..ds.len()).filter(|&j| !observed[j]) {
                if crossed[j] {
                    continue;
                }
                let y = labels[j];
                let prev = prev_pred.as_ref().map_or(f64::NEG_INFINITY, |v| v[j]);
                let hit = match cfg.crossing_rule {
                    CrossingRule::Printed => cur[j] <= y && prev > y,
                    CrossingRule::Conventional => cur[j] >= y && prev < y,
                };
                if hit {
                    crossed[j] = true;
                    q_hat[j] = last_tau;
                } else {
                    q_hat[j] = tau;
                }
            }
        }
        let level_grid = QuantileGrid::new(vec![tau])?;
        let net = fit_portnoy(
            p.x.view(),
            labels,
            observed,
            &level_grid,
            Weighting::Fixed(&q_hat),
            y_star,
            cfg,
            seed::derive(cfg.seed, tags::LEVEL + i as u64),
            &mut log,
            &mut steps,
        )?;
        let pred = net.predict(p.x.view())?.column(0).to_vec();
        prev_pred = cur_pred.replace(pred);
        nets.push(net);
    }

    Ok(TrainOutcome {
        model: TrainedQuantileModel {
            method: Method::SeqGrid,
            grid: cfg.grid.clone(),
            standardizer: p.standardizer,
            y_star: Some(y_star),
            network: Network::PerLevel(nets),
        },
        log,
        steps,
    })
}

/// Two-head network (location and raw scale of `ln y`) fitted by censored
/// maximum likelihood.
pub fn train_lognorm_mle(ds: &CensoredDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if let Some((i, y)) = ds.labels().iter().enumerate().find(|(_, &y)| y <= 0.0 || y.is_nan()) {
        return Err(Error::Data(format!("log-normal model needs positive labels; row {i} has {y}")));
    }
    let p = prepare(ds, cfg)?;
    let labels = ds.labels();
    let observed = ds.observed();
    let mut model = MlpModel::init(
        NetConfig {
            head: crate::nn::OutputHead::Linear,
            ..net_config(cfg, p.x.ncols(), 2)
        },
        cfg.seed,
    )?;
    let mut log = Vec::new();
    let mut steps = 0;
    run_epochs(&mut model, p.x.view(), cfg, cfg.seed, &mut log, &mut steps, |out, idx| {
        let mu: Vec<f64> = out.column(0).to_vec();
        let raw: Vec<f64> = out.column(1).to_vec();
        let yb: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
        let ob: Vec<bool> = idx.iter().map(|&i| observed[i]).collect();
        let r = lognorm_censored_nll(&mu, &raw, &yb, &ob)?;
        let scale = 1.0 / idx.len() as f64;
        let mut grad = Array2::zeros(out.raw_dim());
        for k in 0..idx.len() {
            grad[[k, 0]] = r.grad_mu[k] * scale;
            grad[[k, 1]] = r.grad_raw_sigma[k] * scale;
        }
        Ok((r.loss * scale, grad))
    })?;
    Ok(TrainOutcome {
        model: TrainedQuantileModel {
            method: Method::LogNorm,
            grid: cfg.grid.clone(),
            standardizer: p.standardizer,
            y_star: None,
            network: Network::LogNormal(model),
        },
        log,
        steps,
    })
}

pub fn train(method: Method, ds: &CensoredDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    match method {
        Method::Cqrnn => train_cqrnn(ds, cfg),
        Method::SeqGrid => train_sequential_grid(ds, cfg),
        Method::Excl => train_excl_censor(ds, cfg),
        Method::LogNorm => train_lognorm_mle(ds, cfg),
    }
}
