//! Deep models: greedy bottom-up pre-training, then global fine-tuning of
//! the whole stack with joint MAP assignments.

use ndarray::Array2;

use super::config::{LearnTrace, MStep, TrainConfig};
use super::grad::UpdateMask;
use super::maxmax::{fit_rbn_run, m_step_gaussian, max_max_loop, sgd_m_step};
use crate::error::{Error, Result};
use crate::model::{DataBatch, ModelParams, VisibleKind};
use crate::rng::stream_id;

/// Trains layer 1 on the data, then each higher layer as an RBN on the MAP
/// states inferred in the layer below. Lower layers are never revisited.
pub fn pretrain_layerwise(
    data: &DataBatch,
    sizes: &[usize],
    cfg: &TrainConfig,
) -> Result<(ModelParams, LearnTrace)> {
    if sizes.len() < 2 {
        return Err(Error::Config(format!("need at least one latent layer, got {sizes:?}")));
    }
    let kind = cfg.m_step.visible_kind();
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    let mut trace = LearnTrace::default();
    let mut input = data.clone();
    let mut top_prior = None;
    for l in 0..sizes.len() - 1 {
        let layer_cfg = if l == 0 {
            cfg.clone()
        } else {
            TrainConfig {
                m_step: MStep::SgdBinary,
                seed: stream_id(&[cfg.seed, l as u64]),
                ..cfg.clone()
            }
        };
        let run = fit_rbn_run(&input, &sizes[l..l + 2], &layer_cfg, 1)?;
        if l + 2 < sizes.len() {
            let states = run.final_states(&input, &layer_cfg)?;
            let rows = states.len();
            let width = sizes[l + 1];
            let flat: Vec<f64> = states.iter().flat_map(|s| s.layers[0].iter().map(|&b| b as f64)).collect();
            input = DataBatch::new(
                Array2::from_shape_vec((rows, width), flat).map_err(|e| Error::Shape(e.to_string()))?,
                None,
            )?;
        }
        let mut rbn = run.params;
        top_prior = Some(rbn.top_prior.clone());
        layers.push(rbn.layers.remove(0));
        trace.append(run.trace);
    }
    let params = ModelParams {
        visible_kind: kind,
        layer_sizes: sizes.to_vec(),
        layers,
        top_prior: top_prior.expect("at least one layer"),
        label_head: None,
    };
    params.validate()?;
    Ok((params, trace))
}

/// Joint refinement of every layer: deep coordinate-ascent MAP over the
/// whole latent stack, then a simultaneous update of all layers. A Gaussian
/// visible layer is refit in closed form; the binary layers take gradient
/// steps.
pub fn finetune_global(
    params: &ModelParams,
    data: &DataBatch,
    cfg: &TrainConfig,
) -> Result<(ModelParams, LearnTrace)> {
    cfg.validate_for(params.visible_kind)?;
    params.validate()?;
    data.validate_for(params)?;
    if data.is_empty() {
        return Err(Error::Config("training data is empty".into()));
    }
    let gaussian = params.visible_kind == VisibleKind::Gaussian;
    let mut mask = UpdateMask::all(params);
    mask.label_head = false;
    if gaussian {
        mask.layers[0] = false;
        if params.depth() == 1 {
            mask.top_prior = false;
        }
    }
    let tag = 0xf1;
    let run = max_max_loop(params.clone(), data, cfg, tag, 0, |p, states, epoch| {
        if mask.layers.iter().any(|&on| on) || mask.top_prior {
            sgd_m_step(p, data, states, cfg, epoch, tag, &mask)?;
        }
        if gaussian {
            let h: Vec<Vec<u8>> = states.iter().map(|s| s.layers[0].clone()).collect();
            let (layer, top) = m_step_gaussian(data, &h)?;
            p.layers[0] = layer;
            if p.depth() == 1 {
                p.top_prior = top;
            }
        }
        Ok(())
    })?;
    Ok((run.params, run.trace))
}
