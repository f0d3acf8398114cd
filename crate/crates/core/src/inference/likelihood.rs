use super::ca::{ca_map, CaConfig, InferenceReport};
use super::exact::exact_posterior;
use super::net::InferenceNet;
use crate::error::Result;
use crate::model::{LatentState, ModelParams};
use crate::rng::{seeded, stream_id};

/// Where the MAP configuration for a max-approximated likelihood comes from.
#[derive(Clone, Debug)]
pub enum MapSource<'a> {
    /// Coordinate ascent from a random start seeded by `cfg.seed`.
    Ca(CaConfig),
    /// Coordinate ascent from the inference network's output.
    AugCa { net: &'a InferenceNet, cfg: CaConfig },
    /// Exhaustive search.
    Exact,
}

impl MapSource<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            MapSource::Ca(_) => "ca",
            MapSource::AugCa { .. } => "augca",
            MapSource::Exact => "exact",
        }
    }
}

/// Random starting state for plain coordinate ascent.
pub fn random_init(params: &ModelParams, seed: u64) -> LatentState {
    let mut rng = seeded(seed, stream_id(&[0, 0x1417]));
    LatentState::random(params.latent_sizes(), &mut rng)
}

pub fn map_inference(x: &[f64], params: &ModelParams, source: &MapSource) -> Result<InferenceReport> {
    match source {
        MapSource::Ca(cfg) => ca_map(x, params, &random_init(params, cfg.seed), cfg),
        MapSource::AugCa { net, cfg } => super::ca::aug_ca_map(x, params, net, cfg),
        MapSource::Exact => {
            let table = exact_posterior(x, params)?;
            let index = table.map_index();
            Ok(InferenceReport {
                map_state: table.state(index),
                joint_log_prob: table.log_joint()[index],
                iterations_used: 0,
                flips: 0,
                converged: true,
                trace: None,
            })
        }
    }
}

/// `log P(x) ~ max_h log P(x, h)`, a lower bound on the exact marginal.
pub fn marginal_log_likelihood_max(
    x: &[f64],
    params: &ModelParams,
    source: &MapSource,
) -> Result<f64> {
    Ok(map_inference(x, params, source)?.joint_log_prob)
}
