//! Exhaustive enumeration over latent configurations, for models small
//! enough to afford it. These are the reference answers every approximate
//! routine is checked against.

use super::cache::FlipCache;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{LatentState, ModelParams};

pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// `log P(x, h)` for every latent configuration `h`, indexed as in
/// [`LatentState::from_index`].
#[derive(Clone, Debug)]
pub struct ExactPosterior {
    latent_sizes: Vec<usize>,
    log_joint: Vec<f64>,
    log_marginal: f64,
}

impl ExactPosterior {
    pub fn len(&self) -> usize {
        self.log_joint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_joint.is_empty()
    }

    pub fn log_joint(&self) -> &[f64] {
        &self.log_joint
    }

    /// `log P(x)`.
    pub fn log_marginal(&self) -> f64 {
        self.log_marginal
    }

    pub fn log_prob(&self, index: usize) -> f64 {
        self.log_joint[index] - self.log_marginal
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_joint
            .iter()
            .map(|lj| (lj - self.log_marginal).exp())
            .collect()
    }

    pub fn state(&self, index: usize) -> LatentState {
        LatentState::from_index(&self.latent_sizes, index as u64)
    }

    pub fn map_index(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.log_joint.iter().enumerate() {
            if v > self.log_joint[best] {
                best = i;
            }
        }
        best
    }

    pub fn map_state(&self) -> LatentState {
        self.state(self.map_index())
    }

    /// `max_h log P(x, h)`.
    pub fn max_log_joint(&self) -> f64 {
        self.log_joint[self.map_index()]
    }

    /// Posterior marginals `P(h_k = 1 | x)` over the flattened latent units.
    pub fn marginals(&self) -> Vec<f64> {
        let n: usize = self.latent_sizes.iter().sum();
        let mut out = vec![0.0; n];
        for (index, lj) in self.log_joint.iter().enumerate() {
            let p = (lj - self.log_marginal).exp();
            for (k, m) in out.iter_mut().enumerate() {
                if (index >> k) & 1 == 1 {
                    *m += p;
                }
            }
        }
        out
    }
}

/// Enumerates every configuration in Gray-code order so consecutive states
/// differ by one flip, reusing the incremental cache.
pub fn enumerate_log_joint(
    x: &[f64],
    params: &ModelParams,
    class: Option<usize>,
    cap: usize,
) -> Result<ExactPosterior> {
    let n = params.total_latent();
    if n > cap {
        return Err(Error::EnumerationCap { needed: n, cap });
    }
    let sizes = params.latent_sizes().to_vec();
    let unit_of: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(l, &k)| (0..k).map(move |j| (l, j)))
        .collect();
    let mut state = LatentState::zeros(&sizes);
    let mut cache = FlipCache::with_label(params, x, &state, class)?;
    let total = 1usize << n;
    let mut log_joint = vec![0.0; total];
    log_joint[0] = cache.log_joint();
    for g in 1..total {
        let k = g.trailing_zeros() as usize;
        let (l, j) = unit_of[k];
        cache.apply_flip(&mut state, l, j)?;
        log_joint[g ^ (g >> 1)] = cache.log_joint();
    }
    let log_marginal = log_sum_exp(&log_joint);
    Ok(ExactPosterior {
        latent_sizes: sizes,
        log_joint,
        log_marginal,
    })
}

/// Full posterior table `P(h | x)` under the default enumeration cap.
pub fn exact_posterior(x: &[f64], params: &ModelParams) -> Result<ExactPosterior> {
    enumerate_log_joint(x, params, None, DEFAULT_ENUMERATION_CAP)
}

/// `log P(x) = log sum_h P(x, h)`.
pub fn exact_marginal(x: &[f64], params: &ModelParams) -> Result<f64> {
    Ok(exact_posterior(x, params)?.log_marginal())
}
