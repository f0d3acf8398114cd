//! Incremental conditional-odds computation for single-unit flips.
//!
//! For every layer the cache holds the pre-activations generated by the layer
//! above and the per-unit log-likelihood at those activations. Querying the
//! odds of flipping latent unit `j` evaluates the lower layer's likelihood at
//! the shifted activations only (the current side is already cached), and an
//! accepted flip shifts every lower activation by one add or subtract. Both
//! cost `O(n_lower)`; nothing loops over the latent dimension.

use crate::error::{Error, Result};
use crate::math::{log_bernoulli, log_gaussian, log_softmax};
use crate::model::{LatentState, ModelParams, VisibleKind};

#[derive(Clone, Debug)]
struct LabelCache {
    class: usize,
    logits: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FlipCache<'a> {
    params: &'a ModelParams,
    x: &'a [f64],
    /// `act[t]`: activations of model layer `t` (0 = visible). The last entry
    /// is the top prior and never changes.
    act: Vec<Vec<f64>>,
    /// `ll[t][i] = log P(unit i of layer t | act[t][i])`.
    ll: Vec<Vec<f64>>,
    label: Option<LabelCache>,
    scratch: Vec<f64>,
    scratch_label: Vec<f64>,
    pending: Option<(usize, usize)>,
    ops: u64,
    #[cfg(debug_assertions)]
    signature: u64,
}

#[cfg(debug_assertions)]
fn state_signature(state: &LatentState) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for layer in &state.layers {
        for &bit in layer {
            h = (h ^ bit as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
        h = h.rotate_left(7);
    }
    h
}

impl<'a> FlipCache<'a> {
    pub fn new(params: &'a ModelParams, x: &'a [f64], state: &LatentState) -> Result<Self> {
        Self::with_label(params, x, state, None)
    }

    /// A cache whose objective also includes `log P(y | h^L)`.
    pub fn with_label(
        params: &'a ModelParams,
        x: &'a [f64],
        state: &LatentState,
        class: Option<usize>,
    ) -> Result<Self> {
        params.check_visible(x)?;
        params.check_state(state)?;
        let depth = params.depth();
        let mut act = Vec::with_capacity(depth + 1);
        let mut ll = Vec::with_capacity(depth + 1);
        for t in 0..depth {
            let a = params.layers[t].activation(&state.layers[t]);
            let values = Self::layer_log_probs(params, x, state, t, &a);
            act.push(a);
            ll.push(values);
        }
        let top = params.top_prior.to_vec();
        ll.push(
            state.layers[depth - 1]
                .iter()
                .zip(&top)
                .map(|(&h, &d)| log_bernoulli(h as f64, d))
                .collect(),
        );
        act.push(top);

        let label = match class {
            None => None,
            Some(y) => {
                let logits = params.label_logits(state.top())?;
                if y >= logits.len() {
                    return Err(Error::Domain(format!("class {y} outside [0, {})", logits.len())));
                }
                Some(LabelCache { class: y, logits })
            }
        };
        let widest = params.layer_sizes.iter().copied().max().unwrap_or(0);
        Ok(FlipCache {
            params,
            x,
            act,
            ll,
            label,
            scratch: vec![0.0; widest],
            scratch_label: Vec::new(),
            pending: None,
            ops: 0,
            #[cfg(debug_assertions)]
            signature: state_signature(state),
        })
    }

    fn layer_log_probs(
        params: &ModelParams,
        x: &[f64],
        state: &LatentState,
        t: usize,
        act: &[f64],
    ) -> Vec<f64> {
        if t == 0 {
            match params.visible_kind {
                VisibleKind::Binary => x.iter().zip(act).map(|(&v, &a)| log_bernoulli(v, a)).collect(),
                VisibleKind::Gaussian => {
                    let var = params.layers[0].variances.as_ref().expect("validated");
                    x.iter()
                        .zip(act)
                        .zip(var)
                        .map(|((&v, &a), &s2)| log_gaussian(v, a, s2))
                        .collect()
                }
            }
        } else {
            state.layers[t - 1]
                .iter()
                .zip(act)
                .map(|(&h, &a)| log_bernoulli(h as f64, a))
                .collect()
        }
    }

    #[inline]
    fn check_fresh(&self, state: &LatentState) -> Result<()> {
        #[cfg(debug_assertions)]
        if state_signature(state) != self.signature {
            return Err(Error::Internal(
                "flip cache is stale for the supplied latent state".into(),
            ));
        }
        let _ = state;
        Ok(())
    }

    fn check_unit(&self, layer: usize, j: usize) -> Result<()> {
        let sizes = self.params.latent_sizes();
        if layer >= sizes.len() || j >= sizes[layer] {
            return Err(Error::Shape(format!(
                "latent unit ({layer}, {j}) outside model sizes {sizes:?}"
            )));
        }
        Ok(())
    }

    /// Change in the cached objective if unit `j` of latent layer `layer`
    /// were flipped. Leaves the candidate lower likelihoods in the scratch
    /// buffer so an immediate [`apply_flip`](Self::apply_flip) reuses them.
    pub fn flip_gain(&mut self, state: &LatentState, layer: usize, j: usize) -> Result<f64> {
        self.check_unit(layer, j)?;
        self.check_fresh(state)?;
        let h = state.layers[layer][j];
        let delta = if h == 0 { 1.0 } else { -1.0 };
        let params = self.params;
        let weights = params.layers[layer].weights.column(j);
        let lower_act = &self.act[layer];
        let lower_ll = &self.ll[layer];
        let n_lower = lower_act.len();
        let scratch = &mut self.scratch[..n_lower];

        let mut gain = 0.0;
        if layer == 0 {
            match params.visible_kind {
                VisibleKind::Binary => {
                    for i in 0..n_lower {
                        let v = log_bernoulli(self.x[i], lower_act[i] + delta * weights[i]);
                        scratch[i] = v;
                        gain += v - lower_ll[i];
                    }
                }
                VisibleKind::Gaussian => {
                    let var = params.layers[0].variances.as_ref().expect("validated");
                    for i in 0..n_lower {
                        let v = log_gaussian(self.x[i], lower_act[i] + delta * weights[i], var[i]);
                        scratch[i] = v;
                        gain += v - lower_ll[i];
                    }
                }
            }
        } else {
            let below = &state.layers[layer - 1];
            for i in 0..n_lower {
                let v = log_bernoulli(below[i] as f64, lower_act[i] + delta * weights[i]);
                scratch[i] = v;
                gain += v - lower_ll[i];
            }
        }
        self.ops += n_lower as u64;

        let own_act = self.act[layer + 1][j];
        gain += log_bernoulli((1 - h) as f64, own_act) - self.ll[layer + 1][j];

        if layer + 1 == params.depth() {
            if let Some(label) = &self.label {
                let head = params.label_head.as_ref().expect("checked at construction");
                let mut current = label.logits.clone();
                log_softmax(&mut current);
                self.scratch_label.clear();
                self.scratch_label.extend(
                    label
                        .logits
                        .iter()
                        .zip(head.weights.column(j))
                        .map(|(z, w)| z + delta * w),
                );
                let mut shifted = self.scratch_label.clone();
                log_softmax(&mut shifted);
                gain += shifted[label.class] - current[label.class];
            }
        }
        self.pending = Some((layer, j));
        Ok(gain)
    }

    /// `P(h_j = 1 | x, h_{-j})` from the cached odds ratio.
    pub fn flip_ratio(&mut self, state: &LatentState, layer: usize, j: usize) -> Result<f64> {
        let gain = self.flip_gain(state, layer, j)?;
        // Log-odds of the unit being on versus off.
        let log_odds = if state.layers[layer][j] == 0 { gain } else { -gain };
        Ok(1.0 / (1.0 + (-log_odds).exp()))
    }

    /// Flips the unit in `state` and brings the cache up to date.
    pub fn apply_flip(&mut self, state: &mut LatentState, layer: usize, j: usize) -> Result<()> {
        if self.pending != Some((layer, j)) {
            self.flip_gain(state, layer, j)?;
        } else {
            self.check_fresh(state)?;
        }
        let h = state.layers[layer][j];
        let delta = if h == 0 { 1.0 } else { -1.0 };
        let params = self.params;
        let weights = params.layers[layer].weights.column(j);
        let n_lower = self.act[layer].len();
        for (a, w) in self.act[layer].iter_mut().zip(weights) {
            *a += delta * w;
        }
        self.ll[layer].copy_from_slice(&self.scratch[..n_lower]);

        let new_h = 1 - h;
        state.layers[layer][j] = new_h;
        self.ll[layer + 1][j] = log_bernoulli(new_h as f64, self.act[layer + 1][j]);
        if layer + 1 == params.depth() {
            if let Some(label) = &mut self.label {
                label.logits.copy_from_slice(&self.scratch_label);
            }
        }
        self.pending = None;
        #[cfg(debug_assertions)]
        {
            self.signature = state_signature(state);
        }
        Ok(())
    }

    /// Objective at the cached state: `log P(x, h)` plus the label term when
    /// the cache was built with a class.
    pub fn log_joint(&self) -> f64 {
        let mut total: f64 = self.ll.iter().map(|l| l.iter().sum::<f64>()).sum();
        if let Some(label) = &self.label {
            let mut z = label.logits.clone();
            log_softmax(&mut z);
            total += z[label.class];
        }
        total
    }

    /// Number of per-unit likelihood evaluations performed by flip queries.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    pub fn params(&self) -> &'a ModelParams {
        self.params
    }
}
