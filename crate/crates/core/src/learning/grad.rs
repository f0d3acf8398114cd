//! Gradients of `log P(x, h [, y])` with respect to every parameter group.
//!
//! Variances are differentiated in the log domain; the flattened parameter
//! vector used by finite-difference checks stores `log sigma^2` as well.

use ndarray::{Array1, Array2};

use crate::math::{log_softmax, sigmoid, VARIANCE_FLOOR};
use crate::model::{LatentState, ModelParams, VisibleKind};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub log_variances: Option<Array1<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrad {
    pub layers: Vec<LayerGrad>,
    pub top_prior: Array1<f64>,
    pub label_weights: Option<Array2<f64>>,
    pub label_biases: Option<Array1<f64>>,
}

impl ModelGrad {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ModelGrad {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Array2::zeros(l.weights.dim()),
                    biases: Array1::zeros(l.biases.len()),
                    log_variances: l.variances.as_ref().map(|v| Array1::zeros(v.len())),
                })
                .collect(),
            top_prior: Array1::zeros(params.top_prior.len()),
            label_weights: params.label_head.as_ref().map(|h| Array2::zeros(h.weights.dim())),
            label_biases: params.label_head.as_ref().map(|h| Array1::zeros(h.biases.len())),
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
            if let Some(v) = &mut l.log_variances {
                v.fill(0.0);
            }
        }
        self.top_prior.fill(0.0);
        if let Some(w) = &mut self.label_weights {
            w.fill(0.0);
        }
        if let Some(b) = &mut self.label_biases {
            b.fill(0.0);
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ModelGrad, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.scaled_add(scale, &b.weights);
            a.biases.scaled_add(scale, &b.biases);
            if let (Some(x), Some(y)) = (&mut a.log_variances, &b.log_variances) {
                x.scaled_add(scale, y);
            }
        }
        self.top_prior.scaled_add(scale, &other.top_prior);
        if let (Some(x), Some(y)) = (&mut self.label_weights, &other.label_weights) {
            x.scaled_add(scale, y);
        }
        if let (Some(x), Some(y)) = (&mut self.label_biases, &other.label_biases) {
            x.scaled_add(scale, y);
        }
    }

    /// Flattened in the same order as [`param_vector`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
            if let Some(v) = &l.log_variances {
                out.extend(v.iter());
            }
        }
        out.extend(self.top_prior.iter());
        if let Some(w) = &self.label_weights {
            out.extend(w.iter());
        }
        if let Some(b) = &self.label_biases {
            out.extend(b.iter());
        }
        out
    }

    /// Pairwise sum of per-sample gradients. The tree shape depends only on
    /// the number of items, so the result is reproducible bit-for-bit.
    pub fn pairwise_sum(mut items: Vec<ModelGrad>) -> Option<ModelGrad> {
        while items.len() > 1 {
            let mut next = Vec::with_capacity(items.len().div_ceil(2));
            let mut iter = items.into_iter();
            while let Some(mut a) = iter.next() {
                if let Some(b) = iter.next() {
                    a.add_scaled(&b, 1.0);
                }
                next.push(a);
            }
            items = next;
        }
        items.pop()
    }
}

/// Which parameter groups a gradient step may change.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateMask {
    pub layers: Vec<bool>,
    pub top_prior: bool,
    pub label_head: bool,
}

impl UpdateMask {
    pub fn all(params: &ModelParams) -> Self {
        UpdateMask {
            layers: vec![true; params.depth()],
            top_prior: true,
            label_head: true,
        }
    }
}

/// `params += step * grad` on the unmasked groups; variances move in the log
/// domain and stay above the floor.
pub fn apply_gradient(params: &mut ModelParams, grad: &ModelGrad, step: f64, mask: &UpdateMask) {
    for ((layer, g), &on) in params.layers.iter_mut().zip(&grad.layers).zip(&mask.layers) {
        if !on {
            continue;
        }
        layer.weights.scaled_add(step, &g.weights);
        layer.biases.scaled_add(step, &g.biases);
        if let (Some(var), Some(gv)) = (&mut layer.variances, &g.log_variances) {
            for (v, d) in var.iter_mut().zip(gv) {
                *v = (*v * (step * d).exp()).max(VARIANCE_FLOOR);
            }
        }
    }
    if mask.top_prior {
        params.top_prior.scaled_add(step, &grad.top_prior);
    }
    if mask.label_head {
        if let (Some(head), Some(gw), Some(gb)) =
            (&mut params.label_head, &grad.label_weights, &grad.label_biases)
        {
            head.weights.scaled_add(step, gw);
            head.biases.scaled_add(step, gb);
        }
    }
}

/// Adds `scale * grad log P(x, h)` (plus `log P(y | h^L)` when `class` is
/// given) into `grad`.
pub fn accumulate_joint_grad(
    params: &ModelParams,
    x: &[f64],
    state: &LatentState,
    class: Option<usize>,
    scale: f64,
    grad: &mut ModelGrad,
) {
    for k in 0..params.depth() {
        let layer = &params.layers[k];
        let upper = &state.layers[k];
        let act = layer.activation(upper);
        let g = &mut grad.layers[k];
        let mut residual = vec![0.0; act.len()];
        if k == 0 && params.visible_kind == VisibleKind::Gaussian {
            let var = layer.variances.as_ref().expect("validated");
            let glv = g.log_variances.as_mut().expect("shaped like params");
            for i in 0..act.len() {
                let r = x[i] - act[i];
                residual[i] = r / var[i];
                glv[i] += scale * (-0.5 + r * r / (2.0 * var[i]));
            }
        } else {
            for i in 0..act.len() {
                let v = if k == 0 { x[i] } else { state.layers[k - 1][i] as f64 };
                residual[i] = v - sigmoid(act[i]);
            }
        }
        for (b, r) in g.biases.iter_mut().zip(&residual) {
            *b += scale * r;
        }
        for (j, &h) in upper.iter().enumerate() {
            if h != 0 {
                for (w, r) in g.weights.column_mut(j).iter_mut().zip(&residual) {
                    *w += scale * r;
                }
            }
        }
    }
    for ((g, &h), &d) in grad.top_prior.iter_mut().zip(state.top()).zip(&params.top_prior) {
        *g += scale * (h as f64 - sigmoid(d));
    }
    if let (Some(y), Some(head)) = (class, &params.label_head) {
        let mut z = head.logits(state.top());
        log_softmax(&mut z);
        let gw = grad.label_weights.as_mut().expect("shaped like params");
        let gb = grad.label_biases.as_mut().expect("shaped like params");
        for (c, lz) in z.iter().enumerate() {
            let r = scale * (f64::from(c == y) - lz.exp());
            gb[c] += r;
            for (j, &h) in state.top().iter().enumerate() {
                if h != 0 {
                    gw[[c, j]] += r;
                }
            }
        }
    }
}

/// Every parameter flattened, variances as `log sigma^2`.
pub fn param_vector(params: &ModelParams) -> Vec<f64> {
    let mut out = Vec::new();
    for l in &params.layers {
        out.extend(l.weights.iter());
        out.extend(l.biases.iter());
        if let Some(v) = &l.variances {
            out.extend(v.iter().map(|s| s.ln()));
        }
    }
    out.extend(params.top_prior.iter());
    if let Some(h) = &params.label_head {
        out.extend(h.weights.iter());
        out.extend(h.biases.iter());
    }
    out
}

/// Inverse of [`param_vector`]. The variance floor is not applied here.
pub fn set_param_vector(params: &mut ModelParams, values: &[f64]) {
    let mut it = values.iter().copied();
    for l in &mut params.layers {
        l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
        l.biases.iter_mut().for_each(|b| *b = it.next().unwrap());
        if let Some(v) = &mut l.variances {
            v.iter_mut().for_each(|s| *s = it.next().unwrap().exp());
        }
    }
    params.top_prior.iter_mut().for_each(|d| *d = it.next().unwrap());
    if let Some(h) = &mut params.label_head {
        h.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
        h.biases.iter_mut().for_each(|b| *b = it.next().unwrap());
    }
    assert!(it.next().is_none(), "parameter vector longer than the model");
}

/// Central finite-difference gradient of `f` at `params`.
pub fn finite_difference<F>(params: &ModelParams, step: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&ModelParams) -> f64,
{
    let base = param_vector(params);
    let mut probe = params.clone();
    (0..base.len())
        .map(|k| {
            let mut v = base.clone();
            v[k] = base[k] + step;
            set_param_vector(&mut probe, &v);
            let up = f(&probe);
            v[k] = base[k] - step;
            set_param_vector(&mut probe, &v);
            let down = f(&probe);
            (up - down) / (2.0 * step)
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
