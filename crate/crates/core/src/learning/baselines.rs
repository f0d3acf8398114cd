//! Reference learners for comparison with max-max learning: the
//! inference-network lower bound and exact marginal likelihood by
//! enumeration.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::{LearnTrace, Stopper, TrainConfig};
use super::grad::{accumulate_joint_grad, apply_gradient, ModelGrad, UpdateMask};
use super::maxmax::{init_params, sgd_passes, SgdSchedule};
use crate::error::{Error, Result};
use crate::inference::{
    draw_scores, enumerate_log_joint, marginal_log_likelihood_max, InferenceNet, MapSource,
    ScoreBaseline, DEFAULT_ENUMERATION_CAP,
};
use crate::model::{DataBatch, ModelParams, VisibleKind};
use crate::rng::{seeded, stream_id};

/// `grad_theta log P(x) = E_{P(h|x)}[grad_theta log P(x, h)]`, by enumeration.
pub fn exact_log_likelihood_grad(params: &ModelParams, x: &[f64]) -> Result<ModelGrad> {
    let mut grad = ModelGrad::zeros_like(params);
    add_exact_grad(params, x, 1.0, &mut grad)?;
    Ok(grad)
}

fn add_exact_grad(params: &ModelParams, x: &[f64], scale: f64, grad: &mut ModelGrad) -> Result<f64> {
    let table = enumerate_log_joint(x, params, None, DEFAULT_ENUMERATION_CAP)?;
    for i in 0..table.len() {
        let w = table.log_prob(i).exp();
        if w > 0.0 {
            accumulate_joint_grad(params, x, &table.state(i), None, scale * w, grad);
        }
    }
    Ok(table.log_marginal())
}

/// Gradients of the enumerated lower bound
/// `sum_h Q(h|x) [log P(x, h) - log Q(h|x)]` with respect to the model and
/// the inference network.
pub fn exact_bound_grad(
    params: &ModelParams,
    net: &InferenceNet,
    x: &[f64],
) -> Result<(ModelGrad, InferenceNet)> {
    net.check(params)?;
    let table = enumerate_log_joint(x, params, None, DEFAULT_ENUMERATION_CAP)?;
    let mut g_model = ModelGrad::zeros_like(params);
    let mut g_net = InferenceNet::zeros(params);
    for i in 0..table.len() {
        let state = table.state(i);
        let lq = net.log_q(x, &state);
        let q = lq.exp();
        accumulate_joint_grad(params, x, &state, None, q, &mut g_model);
        net.accumulate_log_q_grad(x, &state, q * (table.log_joint()[i] - lq), &mut g_net);
    }
    Ok((g_model, g_net))
}

/// Mean exact `log P(x)` over the batch.
pub fn exact_mean_log_likelihood(params: &ModelParams, data: &DataBatch) -> Result<f64> {
    let values: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|m| Ok(enumerate_log_joint(data.row(m), params, None, DEFAULT_ENUMERATION_CAP)?.log_marginal()))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / data.len().max(1) as f64)
}

/// Mean `max_h log P(x, h)` over the batch. Random coordinate-ascent
/// starts are reseeded per row.
pub fn max_mean_log_likelihood(params: &ModelParams, data: &DataBatch, source: &MapSource) -> Result<f64> {
    let values: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|m| match source {
            MapSource::Ca(cfg) => {
                let row = MapSource::Ca(cfg.with_seed(stream_id(&[cfg.seed, m as u64])));
                marginal_log_likelihood_max(data.row(m), params, &row)
            }
            other => marginal_log_likelihood_max(data.row(m), params, other),
        })
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / data.len().max(1) as f64)
}

fn check_rbn(data: &DataBatch, sizes: &[usize], cfg: &TrainConfig) -> Result<ModelParams> {
    if data.is_empty() {
        return Err(Error::Config("training data is empty".into()));
    }
    cfg.validate_for(VisibleKind::Binary)?;
    let params = init_params(VisibleKind::Binary, sizes, data, cfg.weight_init_scale, cfg.seed)?;
    data.validate_for(&params)?;
    Ok(params)
}

/// Joint score-function ascent of the inference-network bound in the model
/// and network parameters. Model steps use `cfg.lr`, network steps
/// `cfg.net.lr`.
pub fn fit_variational_baseline(
    data: &DataBatch,
    sizes: &[usize],
    cfg: &TrainConfig,
) -> Result<(ModelParams, LearnTrace)> {
    let mut params = check_rbn(data, sizes, cfg)?;
    let mut net = InferenceNet::random(
        &params,
        cfg.net.init_scale,
        &mut seeded(cfg.seed, stream_id(&[0x1a17, 0xba5e])),
    );
    let mask = UpdateMask::all(&params);
    let mut baseline = ScoreBaseline::default();
    let mut trace = LearnTrace::default();
    let mut stopper = Stopper::new(cfg);
    let mut net_grad = InferenceNet::zeros(&params);
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut total = 0.0;
        for pass in 0..cfg.m_step_epochs.max(1) {
            let mut rng = seeded(cfg.seed, stream_id(&[0xba5e, epoch as u64, pass as u64]));
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng);
            total = 0.0;
            for rows in order.chunks(cfg.batch_size) {
                let samples = draw_scores(&params, &net, data, rows, &mut rng)?;
                let n = rows.len() as f64;
                let mean = samples.iter().map(|s| s.signal).sum::<f64>() / n;
                let b = baseline.get().unwrap_or(mean);
                let snapshot = &params;
                let grads: Vec<ModelGrad> = rows
                    .par_iter()
                    .zip(&samples)
                    .map(|(&m, s)| {
                        let mut g = ModelGrad::zeros_like(snapshot);
                        accumulate_joint_grad(snapshot, data.row(m), &s.state, None, 1.0, &mut g);
                        g
                    })
                    .collect();
                net_grad.fill_zero();
                for (&m, s) in rows.iter().zip(&samples) {
                    net.accumulate_log_q_grad(data.row(m), &s.state, s.signal - b, &mut net_grad);
                }
                let g = ModelGrad::pairwise_sum(grads).expect("non-empty batch");
                apply_gradient(&mut params, &g, cfg.lr / n, &mask);
                net.add_scaled(&net_grad, cfg.net.lr / n);
                baseline.update(mean, cfg.net.baseline_decay);
                total += mean * n;
            }
        }
        let objective = total / data.len() as f64;
        if !objective.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("bound estimate is {objective}"),
            });
        }
        trace.push(epoch, objective, started.elapsed(), params.param_norm());
        if stopper.observe(objective) {
            trace.converged = true;
            break;
        }
    }
    Ok((params, trace))
}

/// Gradient ascent on the exact marginal likelihood, enumerating every
/// latent configuration of every sample.
pub fn fit_exact_tiny(
    data: &DataBatch,
    sizes: &[usize],
    cfg: &TrainConfig,
) -> Result<(ModelParams, LearnTrace)> {
    let latent: usize = sizes.iter().skip(1).sum();
    if latent > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            needed: latent,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    let mut params = check_rbn_or_deep(data, sizes, cfg)?;
    let mask = UpdateMask::all(&params);
    let mut trace = LearnTrace::default();
    let mut stopper = Stopper::new(cfg);
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let sched = SgdSchedule {
            lr: cfg.lr,
            batch_size: cfg.batch_size,
            epochs: cfg.m_step_epochs,
            seed: cfg.seed,
            tag: stream_id(&[0xe7ac, epoch as u64]),
        };
        sgd_passes(&mut params, data.len(), &sched, &mask, |p, m, g| {
            add_exact_grad(p, data.row(m), 1.0, g).map(|_| ())
        })?;
        let objective = exact_mean_log_likelihood(&params, data)?;
        if !objective.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("log-likelihood is {objective}"),
            });
        }
        trace.push(epoch, objective, started.elapsed(), params.param_norm());
        if stopper.observe(objective) {
            trace.converged = true;
            break;
        }
    }
    Ok((params, trace))
}

fn check_rbn_or_deep(data: &DataBatch, sizes: &[usize], cfg: &TrainConfig) -> Result<ModelParams> {
    if data.is_empty() {
        return Err(Error::Config("training data is empty".into()));
    }
    let kind = cfg.m_step.visible_kind();
    cfg.validate_for(kind)?;
    let params = init_params(kind, sizes, data, cfg.weight_init_scale, cfg.seed)?;
    data.validate_for(&params)?;
    Ok(params)
}
