//! Max-max learning: alternate per-sample MAP assignments with a parameter
//! update that maximizes the completed-data log-likelihood.

use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::config::{EStep, LearnTrace, MStep, Stopper, TrainConfig};
use super::grad::{accumulate_joint_grad, apply_gradient, ModelGrad, UpdateMask};
use crate::error::{Error, Result};
use crate::inference::{ca_map_labeled, CaConfig, InferenceNet, InferenceReport, NetTrainConfig, ScoreBaseline};
use crate::math::{logit, VARIANCE_FLOOR};
use crate::model::{DataBatch, LatentState, LayerParams, ModelParams, VisibleKind};
use crate::rng::{seeded, stream_id};

/// Uniform weights in `[-scale, scale]`, zero biases and prior logits, and
/// Gaussian variances set to the per-dimension data variance.
pub fn init_params(
    kind: VisibleKind,
    sizes: &[usize],
    data: &DataBatch,
    scale: f64,
    seed: u64,
) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(kind, sizes)?;
    if data.dim() != params.n_visible() {
        return Err(Error::Shape(format!(
            "data has {} columns, sizes start with {}",
            data.dim(),
            params.n_visible()
        )));
    }
    let mut rng = seeded(seed, stream_id(&[0x1417_0001]));
    for layer in &mut params.layers {
        layer.weights.mapv_inplace(|_| rng.random_range(-scale..=scale));
    }
    if let Some(var) = &mut params.layers[0].variances {
        if !data.is_empty() {
            let n = data.len() as f64;
            for (i, v) in var.iter_mut().enumerate() {
                let col = data.vectors.column(i);
                let mean = col.sum() / n;
                let s2 = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                *v = s2.max(VARIANCE_FLOOR);
            }
        }
    }
    Ok(params)
}

/// Per-sample MAP assignments. Every supplied start (earlier assignments,
/// the inference network's guess) is refined by coordinate ascent and the
/// best result kept; with neither, a seeded random state is used.
#[allow(clippy::too_many_arguments)]
pub(crate) fn e_step(
    params: &ModelParams,
    data: &DataBatch,
    starts: &[&[LatentState]],
    net: Option<&InferenceNet>,
    labels: Option<&[usize]>,
    ca: &CaConfig,
    seed: u64,
    epoch: usize,
) -> Result<Vec<InferenceReport>> {
    (0..data.len())
        .into_par_iter()
        .map(|m| {
            let x = data.row(m);
            let class = labels.map(|l| l[m]);
            let cfg = ca.with_seed(stream_id(&[seed, epoch as u64, m as u64]));
            let mut inits: Vec<LatentState> = starts.iter().map(|s| s[m].clone()).collect();
            if let Some(net) = net {
                inits.push(net.map(x)?);
            }
            if inits.is_empty() {
                let mut rng = seeded(seed, stream_id(&[epoch as u64, m as u64, 0xe5]));
                inits.push(LatentState::random(params.latent_sizes(), &mut rng));
            }
            let mut best: Option<InferenceReport> = None;
            for init in &inits {
                let r = ca_map_labeled(x, params, init, class, &cfg)?;
                if best.as_ref().is_none_or(|b| r.joint_log_prob > b.joint_log_prob) {
                    best = Some(r);
                }
            }
            Ok(best.expect("at least one start"))
        })
        .collect()
}

/// Mean `log P(x^m, h^m)` over the batch.
pub(crate) fn mean_joint(params: &ModelParams, data: &DataBatch, states: &[LatentState]) -> Result<f64> {
    let values: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|m| params.joint_log_prob(data.row(m), &states[m]))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / data.len().max(1) as f64)
}

#[derive(Clone, Debug)]
pub(crate) struct SgdSchedule {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub tag: u64,
}

/// Minibatch gradient ascent. `per_sample` adds sample `m`'s gradient into
/// the buffer it is handed; batch sums are reduced pairwise in sample order.
pub(crate) fn sgd_passes<F>(
    params: &mut ModelParams,
    n: usize,
    sched: &SgdSchedule,
    mask: &UpdateMask,
    per_sample: F,
) -> Result<()>
where
    F: Fn(&ModelParams, usize, &mut ModelGrad) -> Result<()> + Sync,
{
    for epoch in 0..sched.epochs {
        let mut rng = seeded(sched.seed, stream_id(&[sched.tag, epoch as u64, 0x5a1d]));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for rows in order.chunks(sched.batch_size) {
            let snapshot = &*params;
            let grads: Vec<ModelGrad> = rows
                .par_iter()
                .map(|&m| {
                    let mut g = ModelGrad::zeros_like(snapshot);
                    per_sample(snapshot, m, &mut g)?;
                    Ok(g)
                })
                .collect::<Result<_>>()?;
            let total = ModelGrad::pairwise_sum(grads).expect("non-empty batch");
            apply_gradient(params, &total, sched.lr / rows.len() as f64, mask);
        }
    }
    Ok(())
}

/// Closed-form maximizer of `sum_m log P(x^m, h^m)` for a Gaussian visible
/// layer: per visible unit a ridge regression of `x_i` on `[h; 1]`, the
/// residual variance, and prior logits from the latent means.
pub fn m_step_gaussian(data: &DataBatch, assignments: &[Vec<u8>]) -> Result<(LayerParams, Array1<f64>)> {
    const RIDGE: f64 = 1e-6;
    let m_count = data.len();
    if m_count == 0 || assignments.len() != m_count {
        return Err(Error::Shape(format!(
            "{} assignments for {m_count} samples",
            assignments.len()
        )));
    }
    let n = assignments[0].len();
    let d = data.dim();
    if assignments.iter().any(|h| h.len() != n) {
        return Err(Error::Shape("assignments have differing lengths".into()));
    }
    let mut gram = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DMatrix::<f64>::zeros(n + 1, d);
    let mut active = Vec::with_capacity(n + 1);
    for (m, h) in assignments.iter().enumerate() {
        active.clear();
        active.extend(h.iter().enumerate().filter(|(_, &b)| b != 0).map(|(j, _)| j));
        active.push(n);
        let x = data.row(m);
        for &j in &active {
            for &k in &active {
                gram[(j, k)] += 1.0;
            }
            for (i, &xi) in x.iter().enumerate() {
                rhs[(j, i)] += xi;
            }
        }
    }
    for j in 0..n {
        gram[(j, j)] += RIDGE;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("normal equations are singular despite the ridge".into()))?;
    let coef = chol.solve(&rhs);
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("regression produced non-finite coefficients".into()));
    }
    let weights = Array2::from_shape_fn((d, n), |(i, j)| coef[(j, i)]);
    let biases = Array1::from_shape_fn(d, |i| coef[(n, i)]);

    let mut sq = vec![0.0; d];
    for (m, h) in assignments.iter().enumerate() {
        let x = data.row(m);
        let mut pred = biases.to_vec();
        for (j, &b) in h.iter().enumerate() {
            if b != 0 {
                for (p, w) in pred.iter_mut().zip(weights.column(j)) {
                    *p += w;
                }
            }
        }
        for i in 0..d {
            sq[i] += (x[i] - pred[i]).powi(2);
        }
    }
    let variances = Array1::from_iter(sq.iter().map(|s| (s / m_count as f64).max(VARIANCE_FLOOR)));
    let top_prior = Array1::from_shape_fn(n, |j| {
        let on = assignments.iter().filter(|h| h[j] != 0).count() as f64;
        logit((on / m_count as f64).clamp(1e-3, 1.0 - 1e-3))
    });
    Ok((
        LayerParams {
            weights,
            biases,
            variances: Some(variances),
        },
        top_prior,
    ))
}

/// Stochastic gradient ascent on `sum_m log P(x^m, h^m)` for one binary
/// RBN layer, warm-started from `layer` and `top_prior`.
#[allow(clippy::too_many_arguments)]
pub fn m_step_binary_sgd(
    layer: &LayerParams,
    top_prior: &Array1<f64>,
    data: &DataBatch,
    assignments: &[Vec<u8>],
    lr: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<(LayerParams, Array1<f64>)> {
    if !(lr > 0.0) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let mut params = ModelParams {
        visible_kind: VisibleKind::Binary,
        layer_sizes: vec![layer.n_lower(), layer.n_upper()],
        layers: vec![LayerParams {
            variances: None,
            ..layer.clone()
        }],
        top_prior: top_prior.clone(),
        label_head: None,
    };
    params.validate()?;
    data.validate_for(&params)?;
    if assignments.len() != data.len() {
        return Err(Error::Shape(format!(
            "{} assignments for {} samples",
            assignments.len(),
            data.len()
        )));
    }
    let states: Vec<LatentState> = assignments
        .iter()
        .map(|h| LatentState {
            layers: vec![h.clone()],
        })
        .collect();
    for s in &states {
        params.check_state(s)?;
    }
    let sched = SgdSchedule {
        lr,
        batch_size,
        epochs,
        seed,
        tag: 0xb1,
    };
    let mask = UpdateMask::all(&params);
    sgd_passes(&mut params, data.len(), &sched, &mask, |p, m, g| {
        accumulate_joint_grad(p, data.row(m), &states[m], None, 1.0, g);
        Ok(())
    })?;
    let top = params.top_prior;
    let layer = params.layers.pop().expect("one layer");
    Ok((layer, top))
}

/// Outcome of a max-max run, with the pieces layerwise pre-training needs.
pub(crate) struct MaxMaxRun {
    pub params: ModelParams,
    pub trace: LearnTrace,
    pub net: Option<InferenceNet>,
    pub states: Option<Vec<LatentState>>,
    pub seed: u64,
}

impl MaxMaxRun {
    /// MAP assignments under the final parameters.
    pub fn final_states(&self, data: &DataBatch, cfg: &TrainConfig) -> Result<Vec<LatentState>> {
        let epoch = self.trace.epochs.len();
        let starts: Vec<&[LatentState]> = self.states.iter().map(Vec::as_slice).collect();
        let reports = e_step(
            &self.params,
            data,
            &starts,
            self.net.as_ref(),
            None,
            &cfg.ca_cfg,
            self.seed,
            epoch,
        )?;
        Ok(reports.into_iter().map(|r| r.map_state).collect())
    }
}

/// Creates the inference network on first use and runs `cfg.net.epochs`
/// more passes of score-function training against the current model.
pub(crate) fn refresh_net(
    net: &mut Option<InferenceNet>,
    baseline: &mut ScoreBaseline,
    params: &ModelParams,
    data: &DataBatch,
    cfg: &TrainConfig,
    seed: u64,
    epoch: usize,
) -> Result<()> {
    let n = net.get_or_insert_with(|| {
        let mut rng = seeded(seed, stream_id(&[0x1a17]));
        InferenceNet::random(params, cfg.net.init_scale, &mut rng)
    });
    let net_cfg = NetTrainConfig {
        seed,
        ..cfg.net.clone()
    };
    n.fit(params, data, &net_cfg, baseline, epoch * cfg.net.epochs)?;
    Ok(())
}

/// The alternating loop shared by single-layer learning and deep
/// fine-tuning; `m_step` receives the epoch's assignments.
pub(crate) fn max_max_loop<M>(
    mut params: ModelParams,
    data: &DataBatch,
    cfg: &TrainConfig,
    tag: u64,
    warmup: usize,
    mut m_step: M,
) -> Result<MaxMaxRun>
where
    M: FnMut(&mut ModelParams, &[LatentState], usize) -> Result<()>,
{
    let seed = stream_id(&[cfg.seed, tag]);
    let mut trace = LearnTrace::default();
    let mut stopper = Stopper::new(cfg);
    let mut prev: Option<Vec<LatentState>> = None;
    let mut net: Option<InferenceNet> = None;
    let mut baseline = ScoreBaseline::default();
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        if cfg.e_step == EStep::AugCa && epoch >= warmup {
            refresh_net(&mut net, &mut baseline, &params, data, cfg, seed, epoch)?;
        }
        let starts: Vec<&[LatentState]> = prev.iter().map(Vec::as_slice).collect();
        let reports = e_step(&params, data, &starts, net.as_ref(), None, &cfg.ca_cfg, seed, epoch)?;
        let states: Vec<LatentState> = reports.into_iter().map(|r| r.map_state).collect();
        m_step(&mut params, &states, epoch)?;
        let objective = mean_joint(&params, data, &states)?;
        if !objective.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("objective is {objective}"),
            });
        }
        trace.push(epoch, objective, started.elapsed(), params.param_norm());
        log::debug!("max-max epoch {epoch}: objective {objective:.6}");
        prev = Some(states);
        if stopper.observe(objective) {
            trace.converged = true;
            break;
        }
    }
    Ok(MaxMaxRun {
        params,
        trace,
        net,
        states: prev,
        seed,
    })
}

/// Gradient-ascent M-step over every layer allowed by `mask`.
pub(crate) fn sgd_m_step(
    params: &mut ModelParams,
    data: &DataBatch,
    states: &[LatentState],
    cfg: &TrainConfig,
    epoch: usize,
    tag: u64,
    mask: &UpdateMask,
) -> Result<()> {
    let sched = SgdSchedule {
        lr: cfg.lr,
        batch_size: cfg.batch_size,
        epochs: cfg.m_step_epochs,
        seed: cfg.seed,
        tag: stream_id(&[tag, epoch as u64]),
    };
    sgd_passes(params, data.len(), &sched, mask, |p, m, g| {
        accumulate_joint_grad(p, data.row(m), &states[m], None, 1.0, g);
        Ok(())
    })
}

pub(crate) fn fit_rbn_run(data: &DataBatch, sizes: &[usize], cfg: &TrainConfig, tag: u64) -> Result<MaxMaxRun> {
    if sizes.len() != 2 {
        return Err(Error::Config(format!(
            "an RBN has one latent layer, got sizes {sizes:?}"
        )));
    }
    if data.is_empty() {
        return Err(Error::Config("training data is empty".into()));
    }
    let kind = cfg.m_step.visible_kind();
    cfg.validate_for(kind)?;
    let params = init_params(kind, sizes, data, cfg.weight_init_scale, cfg.seed)?;
    data.validate_for(&params)?;
    let mask = UpdateMask::all(&params);
    max_max_loop(params, data, cfg, tag, cfg.aug_warmup_epochs, |p, states, epoch| match cfg.m_step {
        MStep::ClosedFormGaussian => {
            let h: Vec<Vec<u8>> = states.iter().map(|s| s.layers[0].clone()).collect();
            let (layer, top) = m_step_gaussian(data, &h)?;
            p.layers[0] = layer;
            p.top_prior = top;
            Ok(())
        }
        MStep::SgdBinary => sgd_m_step(p, data, states, cfg, epoch, tag, &mask),
    })
}

/// Max-max learning of a single-latent-layer model. The visible kind follows
/// `cfg.m_step`.
pub fn fit_rbn_unsupervised(
    data: &DataBatch,
    sizes: &[usize],
    cfg: &TrainConfig,
) -> Result<(ModelParams, LearnTrace)> {
    let run = fit_rbn_run(data, sizes, cfg, 1)?;
    Ok((run.params, run.trace))
}
