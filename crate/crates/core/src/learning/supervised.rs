//! Discriminative fine-tuning: maximize `sum_m log max_h P(y^m, h | x^m)`.
//!
//! `P(y, h | x)` is proportional to `P(y | h^L) P(x, h)`, so the per-sample
//! objective is `log P(y | h_y) + log P(x, h_y) - log P(x, h_free)` with
//! `h_y` the labelled MAP state and `h_free` the unlabelled one standing in
//! for the normalizer.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{EStep, LearnTrace, Stopper, TrainConfig};
use super::grad::{accumulate_joint_grad, UpdateMask};
use super::maxmax::{e_step, refresh_net, sgd_passes, SgdSchedule};
use crate::error::{Error, Result};
use crate::inference::{ca_map, ca_map_labeled, CaConfig, InferenceNet, ScoreBaseline};
use crate::model::{DataBatch, LabelHead, LatentState, ModelParams};
use crate::rng::{seeded, stream_id};

fn labels_of(data: &DataBatch) -> Result<&[usize]> {
    data.labels
        .as_deref()
        .ok_or_else(|| Error::Config("supervised fine-tuning needs labels".into()))
}

/// Mean supervised objective at the given assignments.
pub fn supervised_objective(
    params: &ModelParams,
    data: &DataBatch,
    labelled: &[LatentState],
    free: &[LatentState],
) -> Result<f64> {
    let labels = labels_of(data)?;
    let values: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|m| {
            let x = data.row(m);
            Ok(params.label_log_posterior(labels[m], labelled[m].top())?
                + params.joint_log_prob(x, &labelled[m])?
                - params.joint_log_prob(x, &free[m])?)
        })
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / data.len().max(1) as f64)
}

pub fn finetune_supervised(
    params: &ModelParams,
    data: &DataBatch,
    cfg: &TrainConfig,
) -> Result<(ModelParams, LearnTrace)> {
    let mut mask = UpdateMask::all(params);
    mask.label_head = true;
    finetune_supervised_masked(params, data, cfg, &mask)
}

/// As [`finetune_supervised`], updating only the groups `mask` allows.
pub fn finetune_supervised_masked(
    params: &ModelParams,
    data: &DataBatch,
    cfg: &TrainConfig,
    mask: &UpdateMask,
) -> Result<(ModelParams, LearnTrace)> {
    let labels = labels_of(data)?;
    cfg.validate()?;
    params.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training data is empty".into()));
    }
    let mut params = params.clone();
    if params.label_head.is_none() {
        let classes = labels.iter().copied().max().unwrap_or(0) + 1;
        params.label_head = Some(LabelHead::zeros(classes, *params.layer_sizes.last().unwrap()));
    }
    data.validate_for(&params)?;

    let seed = stream_id(&[cfg.seed, 0x5e]);
    let mut trace = LearnTrace::default();
    let mut stopper = Stopper::new(cfg);
    let mut prev_free: Option<Vec<LatentState>> = None;
    let mut prev_labelled: Option<Vec<LatentState>> = None;
    let mut net: Option<InferenceNet> = None;
    let mut baseline = ScoreBaseline::default();
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        if cfg.e_step == EStep::AugCa && epoch >= cfg.aug_warmup_epochs {
            refresh_net(&mut net, &mut baseline, &params, data, cfg, seed, epoch)?;
        }
        let starts: Vec<&[LatentState]> = prev_free.iter().map(Vec::as_slice).collect();
        let free: Vec<LatentState> = e_step(&params, data, &starts, net.as_ref(), None, &cfg.ca_cfg, seed, epoch)?
            .into_iter()
            .map(|r| r.map_state)
            .collect();
        let mut starts: Vec<&[LatentState]> = vec![&free];
        starts.extend(prev_labelled.iter().map(Vec::as_slice));
        let labelled: Vec<LatentState> =
            e_step(&params, data, &starts, None, Some(labels), &cfg.ca_cfg, seed ^ 0x1abe1, epoch)?
                .into_iter()
                .map(|r| r.map_state)
                .collect();

        let sched = SgdSchedule {
            lr: cfg.lr,
            batch_size: cfg.batch_size,
            epochs: cfg.m_step_epochs,
            seed: cfg.seed,
            tag: stream_id(&[0x5e, epoch as u64]),
        };
        sgd_passes(&mut params, data.len(), &sched, mask, |p, m, g| {
            let x = data.row(m);
            accumulate_joint_grad(p, x, &labelled[m], Some(labels[m]), 1.0, g);
            accumulate_joint_grad(p, x, &free[m], None, -1.0, g);
            Ok(())
        })?;
        let objective = supervised_objective(&params, data, &labelled, &free)?;
        if !objective.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("supervised objective is {objective}"),
            });
        }
        trace.push(epoch, objective, started.elapsed(), params.param_norm());
        prev_free = Some(free);
        prev_labelled = Some(labelled);
        if stopper.observe(objective) {
            trace.converged = true;
            break;
        }
    }
    Ok((params, trace))
}

/// `argmax_y max_h log P(y, h | x)`: unlabelled MAP first, then a labelled
/// coordinate ascent from it for every class. Returns the class and the
/// per-class scores.
pub fn classify(
    x: &[f64],
    params: &ModelParams,
    net: Option<&InferenceNet>,
    cfg: &CaConfig,
) -> Result<(usize, Vec<f64>)> {
    let head = params
        .label_head
        .as_ref()
        .ok_or_else(|| Error::Config("model has no label head".into()))?;
    let init = match net {
        Some(n) => n.map(x)?,
        None => LatentState::random(params.latent_sizes(), &mut seeded(cfg.seed, stream_id(&[0xc1a5]))),
    };
    let free = ca_map(x, params, &init, cfg)?.map_state;
    let mut scores = Vec::with_capacity(head.n_classes());
    for y in 0..head.n_classes() {
        scores.push(ca_map_labeled(x, params, &free, Some(y), cfg)?.joint_log_prob);
    }
    let mut best = 0;
    for (y, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = y;
        }
    }
    Ok((best, scores))
}

/// Predicted class for every row.
pub fn classify_batch(
    data: &DataBatch,
    params: &ModelParams,
    net: Option<&InferenceNet>,
    cfg: &CaConfig,
) -> Result<Vec<usize>> {
    (0..data.len())
        .into_par_iter()
        .map(|m| {
            let c = cfg.with_seed(stream_id(&[cfg.seed, m as u64]));
            classify(data.row(m), params, net, &c).map(|(y, _)| y)
        })
        .collect()
}
