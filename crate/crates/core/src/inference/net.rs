//! Factorized feed-forward approximation `Q(h | x)` of the posterior.
//!
//! Each latent layer gets a sigmoid layer fed by the layer below it (the
//! data for layer 1, the sampled or thresholded layer below otherwise), so
//! `Q(h | x) = prod_l prod_j q(h^l_j | h^{l-1})`. Training maximizes the
//! lower bound `E_Q[log P(x, h) - log Q(h | x)]` with the score-function
//! estimator and a moving-average baseline.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::exact::{enumerate_log_joint, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::math::{log_bernoulli, sigmoid};
use crate::model::{DataBatch, LatentState, ModelParams};
use crate::rng::{seeded, stream_id, DetRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetLayer {
    /// `n_out x n_in`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceNet {
    pub layers: Vec<NetLayer>,
}

impl InferenceNet {
    /// All-zero network shaped for `params`.
    pub fn zeros(params: &ModelParams) -> Self {
        InferenceNet {
            layers: params
                .layer_sizes
                .windows(2)
                .map(|w| NetLayer {
                    weights: Array2::zeros((w[1], w[0])),
                    biases: Array1::zeros(w[1]),
                })
                .collect(),
        }
    }

    /// Weights uniform in `[-scale, scale]`, biases zero.
    pub fn random<R: Rng>(params: &ModelParams, scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(params);
        for layer in &mut net.layers {
            layer.weights.mapv_inplace(|_| rng.random_range(-scale..=scale));
        }
        net
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        let ok = self.layers.len() == params.depth()
            && self.layers.iter().zip(params.layer_sizes.windows(2)).all(|(l, w)| {
                l.weights.dim() == (w[1], w[0]) && l.biases.len() == w[1]
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("inference network does not match model sizes".into()))
        }
    }

    fn logits(&self, layer: usize, input: &[f64]) -> Vec<f64> {
        let l = &self.layers[layer];
        l.weights
            .rows()
            .into_iter()
            .zip(&l.biases)
            .map(|(row, &s)| s + row.iter().zip(input).map(|(v, x)| v * x).sum::<f64>())
            .collect()
    }

    /// `q(h^l_j = 1 | input)` for one layer.
    pub fn probs(&self, layer: usize, input: &[f64]) -> Vec<f64> {
        self.logits(layer, input).into_iter().map(sigmoid).collect()
    }

    /// Thresholds every unit at 0.5, layer by layer; `q = 0.5` maps to 1.
    pub fn map(&self, x: &[f64]) -> Result<LatentState> {
        let n_in = self.layers.first().map_or(0, |l| l.weights.ncols());
        if x.len() != n_in {
            return Err(Error::Shape(format!(
                "input length {} does not match network input {n_in}",
                x.len()
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut input = x.to_vec();
        for l in 0..self.layers.len() {
            let bits: Vec<u8> = self.probs(l, &input).iter().map(|&q| u8::from(q >= 0.5)).collect();
            input = bits.iter().map(|&b| b as f64).collect();
            layers.push(bits);
        }
        Ok(LatentState { layers })
    }

    /// Draws `h ~ Q(. | x)` and returns it with `log Q(h | x)`.
    pub fn sample<R: Rng>(&self, x: &[f64], rng: &mut R) -> (LatentState, f64) {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut log_q = 0.0;
        let mut input = x.to_vec();
        for l in 0..self.layers.len() {
            let logits = self.logits(l, &input);
            let bits: Vec<u8> = logits
                .iter()
                .map(|&a| u8::from(rng.random::<f64>() < sigmoid(a)))
                .collect();
            log_q += bits
                .iter()
                .zip(&logits)
                .map(|(&b, &a)| log_bernoulli(b as f64, a))
                .sum::<f64>();
            input = bits.iter().map(|&b| b as f64).collect();
            layers.push(bits);
        }
        (LatentState { layers }, log_q)
    }

    pub fn log_q(&self, x: &[f64], state: &LatentState) -> f64 {
        let mut total = 0.0;
        let mut input = x.to_vec();
        for (l, bits) in state.layers.iter().enumerate() {
            let logits = self.logits(l, &input);
            total += bits
                .iter()
                .zip(&logits)
                .map(|(&b, &a)| log_bernoulli(b as f64, a))
                .sum::<f64>();
            input = bits.iter().map(|&b| b as f64).collect();
        }
        total
    }

    /// Adds `scale * grad_phi log Q(h | x)` into `grad`.
    pub fn accumulate_log_q_grad(
        &self,
        x: &[f64],
        state: &LatentState,
        scale: f64,
        grad: &mut InferenceNet,
    ) {
        let mut input = x.to_vec();
        for (l, bits) in state.layers.iter().enumerate() {
            let probs = self.probs(l, &input);
            let g = &mut grad.layers[l];
            for (j, (&b, &q)) in bits.iter().zip(&probs).enumerate() {
                let r = scale * (b as f64 - q);
                if r == 0.0 {
                    continue;
                }
                g.biases[j] += r;
                for (w, &v) in g.weights.row_mut(j).iter_mut().zip(&input) {
                    *w += r * v;
                }
            }
            input = bits.iter().map(|&b| b as f64).collect();
        }
    }

    /// `self += step * grad`.
    pub fn add_scaled(&mut self, grad: &InferenceNet, step: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            l.weights.scaled_add(step, &g.weights);
            l.biases.scaled_add(step, &g.biases);
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }
}

/// Lower bound `sum_h Q(h|x) log[P(x, h) / Q(h|x)]` by enumeration.
pub fn exact_bound(params: &ModelParams, net: &InferenceNet, x: &[f64]) -> Result<f64> {
    net.check(params)?;
    let table = enumerate_log_joint(x, params, None, DEFAULT_ENUMERATION_CAP)?;
    Ok((0..table.len())
        .map(|i| {
            let lq = net.log_q(x, &table.state(i));
            lq.exp() * (table.log_joint()[i] - lq)
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub baseline_decay: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for NetTrainConfig {
    fn default() -> Self {
        NetTrainConfig {
            epochs: 20,
            lr: 0.01,
            batch_size: 100,
            baseline_decay: 0.9,
            seed: 0,
            init_scale: 0.01,
        }
    }
}

impl NetTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::Config("baseline_decay must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Exponential moving average of the learning signal.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScoreBaseline {
    value: Option<f64>,
}

impl ScoreBaseline {
    pub fn get(&self) -> Option<f64> {
        self.value
    }

    pub fn update(&mut self, batch_mean: f64, decay: f64) {
        self.value = Some(match self.value {
            None => batch_mean,
            Some(v) => decay * v + (1.0 - decay) * batch_mean,
        });
    }
}

/// One sampled latent state for a data row, with its learning signal.
pub(crate) struct ScoreSample {
    pub state: LatentState,
    pub signal: f64,
}

/// Draws one `h ~ Q` per row of `rows` and returns the learning signals
/// `log P(x, h) - log Q(h | x)`.
pub(crate) fn draw_scores(
    params: &ModelParams,
    net: &InferenceNet,
    data: &DataBatch,
    rows: &[usize],
    rng: &mut DetRng,
) -> Result<Vec<ScoreSample>> {
    rows.iter()
        .map(|&m| {
            let x = data.row(m);
            let (state, log_q) = net.sample(x, rng);
            let log_p = params.joint_log_prob(x, &state)?;
            Ok(ScoreSample {
                state,
                signal: log_p - log_q,
            })
        })
        .collect()
}

impl InferenceNet {
    /// Continues score-function training from the current weights. Returns
    /// the mean learning signal (a stochastic estimate of the bound) of
    /// every epoch run.
    pub fn fit(
        &mut self,
        params: &ModelParams,
        data: &DataBatch,
        cfg: &NetTrainConfig,
        baseline: &mut ScoreBaseline,
        epoch_offset: usize,
    ) -> Result<Vec<f64>> {
        cfg.validate()?;
        self.check(params)?;
        data.validate_for(params)?;
        let mut grad = InferenceNet::zeros(params);
        let mut bounds = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let mut rng = seeded(cfg.seed, stream_id(&[(epoch + epoch_offset) as u64, 0x1e7]));
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for rows in order.chunks(cfg.batch_size) {
                let samples = draw_scores(params, self, data, rows, &mut rng)?;
                let mean = samples.iter().map(|s| s.signal).sum::<f64>() / rows.len() as f64;
                let b = baseline.get().unwrap_or(mean);
                grad.fill_zero();
                for (&m, s) in rows.iter().zip(&samples) {
                    self.accumulate_log_q_grad(data.row(m), &s.state, s.signal - b, &mut grad);
                }
                self.add_scaled(&grad, cfg.lr / rows.len() as f64);
                baseline.update(mean, cfg.baseline_decay);
                total += mean * rows.len() as f64;
            }
            let epoch_bound = total / data.len().max(1) as f64;
            if !epoch_bound.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    reason: "inference network bound is not finite".into(),
                });
            }
            bounds.push(epoch_bound);
        }
        Ok(bounds)
    }
}

/// Trains a fresh inference network for `params` on `data`.
pub fn train_inference_net(
    params: &ModelParams,
    data: &DataBatch,
    cfg: &NetTrainConfig,
) -> Result<(InferenceNet, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed, stream_id(&[0x1a17]));
    let mut net = InferenceNet::random(params, cfg.init_scale, &mut rng);
    let mut baseline = ScoreBaseline::default();
    let bounds = net.fit(params, data, cfg, &mut baseline, 0)?;
    Ok((net, bounds))
}

/// Thresholded factorized MAP state.
pub fn inference_net_map(x: &[f64], net: &InferenceNet) -> Result<LatentState> {
    net.map(x)
}
