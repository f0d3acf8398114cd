//! Regression Bayesian network parameters and the probability quantities
//! defined by them.
//!
//! A model is a stack of directed layers. `layer_sizes[0]` is the visible
//! layer, `layer_sizes[1..]` are binary latent layers ordered bottom-up, and
//! `layers[k]` holds the weights that generate layer `k` from layer `k + 1`.
//! Weights are stored lower-layer-major: row `i` of `layers[k].weights` is the
//! weight vector feeding unit `i` of layer `k`.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, log_bernoulli, log_gaussian, sigmoid};
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisibleKind {
    Binary,
    Gaussian,
}

impl std::fmt::Display for VisibleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VisibleKind::Binary => f.write_str("binary"),
            VisibleKind::Gaussian => f.write_str("gaussian"),
        }
    }
}

/// Parameters generating one layer from the layer above it.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    /// `n_lower x n_upper`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    /// Conditional variances, only for a Gaussian visible layer.
    pub variances: Option<Array1<f64>>,
}

impl LayerParams {
    pub fn n_lower(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_upper(&self) -> usize {
        self.weights.ncols()
    }

    /// Pre-activations `W h + b` of the lower layer given the upper state.
    pub fn activation(&self, upper: &[u8]) -> Vec<f64> {
        let mut act = self.biases.to_vec();
        for (j, &h) in upper.iter().enumerate() {
            if h != 0 {
                for (a, w) in act.iter_mut().zip(self.weights.column(j)) {
                    *a += w;
                }
            }
        }
        act
    }
}

/// Categorical softmax head attached to the top latent layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelHead {
    /// `n_classes x n_top`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl LabelHead {
    pub fn zeros(n_classes: usize, n_top: usize) -> Self {
        LabelHead {
            weights: Array2::zeros((n_classes, n_top)),
            biases: Array1::zeros(n_classes),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.biases.len()
    }

    pub fn logits(&self, top: &[u8]) -> Vec<f64> {
        let mut z = self.biases.to_vec();
        for (j, &h) in top.iter().enumerate() {
            if h != 0 {
                for (zc, w) in z.iter_mut().zip(self.weights.column(j)) {
                    *zc += w;
                }
            }
        }
        z
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub visible_kind: VisibleKind,
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<LayerParams>,
    /// Prior logits of the top latent layer.
    pub top_prior: Array1<f64>,
    pub label_head: Option<LabelHead>,
}

/// One binary configuration per latent layer, bottom-up.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatentState {
    pub layers: Vec<Vec<u8>>,
}

impl LatentState {
    pub fn zeros(latent_sizes: &[usize]) -> Self {
        LatentState {
            layers: latent_sizes.iter().map(|&n| vec![0; n]).collect(),
        }
    }

    pub fn random<R: Rng>(latent_sizes: &[usize], rng: &mut R) -> Self {
        LatentState {
            layers: latent_sizes
                .iter()
                .map(|&n| (0..n).map(|_| rng.random_range(0..2u8)).collect())
                .collect(),
        }
    }

    /// Decodes a flat bit pattern, layer 1 occupying the lowest bits.
    pub fn from_index(latent_sizes: &[usize], mut index: u64) -> Self {
        let layers = latent_sizes
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|_| {
                        let bit = (index & 1) as u8;
                        index >>= 1;
                        bit
                    })
                    .collect()
            })
            .collect();
        LatentState { layers }
    }

    pub fn to_index(&self) -> u64 {
        let mut index = 0u64;
        let mut shift = 0;
        for layer in &self.layers {
            for &h in layer {
                index |= (h as u64) << shift;
                shift += 1;
            }
        }
        index
    }

    pub fn top(&self) -> &[u8] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn flat(&self) -> Vec<u8> {
        self.layers.iter().flatten().copied().collect()
    }

    pub fn hamming(&self, other: &LatentState) -> usize {
        self.layers
            .iter()
            .flatten()
            .zip(other.layers.iter().flatten())
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Visible vectors, one per row, with optional class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DataBatch {
    pub vectors: Array2<f64>,
    pub labels: Option<Vec<usize>>,
}

impl DataBatch {
    pub fn new(vectors: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != vectors.nrows() {
                return Err(Error::Shape(format!(
                    "{} labels for {} vectors",
                    labels.len(),
                    vectors.nrows()
                )));
            }
        }
        Ok(DataBatch { vectors, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let vectors = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(DataBatch {
            vectors,
            labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Row `m` as a contiguous slice.
    pub fn row(&self, m: usize) -> &[f64] {
        self.vectors
            .row(m)
            .to_slice()
            .expect("data batches are stored in standard layout")
    }

    /// Checks column count, binary entries and label range against a model.
    pub fn validate_for(&self, params: &ModelParams) -> Result<()> {
        if self.dim() != params.n_visible() {
            return Err(Error::Shape(format!(
                "data has {} columns, model expects {}",
                self.dim(),
                params.n_visible()
            )));
        }
        if params.visible_kind == VisibleKind::Binary
            && self.vectors.iter().any(|&v| v != 0.0 && v != 1.0)
        {
            return Err(Error::Domain("binary model given non-binary data".into()));
        }
        if let (Some(labels), Some(head)) = (&self.labels, &params.label_head) {
            if let Some(&bad) = labels.iter().find(|&&y| y >= head.n_classes()) {
                return Err(Error::Domain(format!(
                    "label {bad} outside [0, {})",
                    head.n_classes()
                )));
            }
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> DataBatch {
        let vectors = self.vectors.select(ndarray::Axis(0), indices);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        DataBatch { vectors, labels }
    }
}

/// `P(H_j = 1) = sigm(d_j)`.
pub fn latent_prior_prob(d: f64) -> Result<f64> {
    if !d.is_finite() {
        return Err(Error::Domain(format!("prior logit {d} is not finite")));
    }
    Ok(sigmoid(d))
}

impl ModelParams {
    /// All weights and biases zero; Gaussian variances one.
    pub fn zeros(visible_kind: VisibleKind, layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "a model needs a visible layer and at least one latent layer".into(),
            ));
        }
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| LayerParams {
                weights: Array2::zeros((w[0], w[1])),
                biases: Array1::zeros(w[0]),
                variances: (k == 0 && visible_kind == VisibleKind::Gaussian)
                    .then(|| Array1::ones(w[0])),
            })
            .collect();
        let params = ModelParams {
            visible_kind,
            layer_sizes: layer_sizes.to_vec(),
            layers,
            top_prior: Array1::zeros(*layer_sizes.last().unwrap()),
            label_head: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// Weights, biases and prior logits uniform in `[-scale, scale]`;
    /// variances uniform in `[0.25, 1.25]`.
    pub fn random<R: Rng>(
        visible_kind: VisibleKind,
        layer_sizes: &[usize],
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::zeros(visible_kind, layer_sizes)?;
        for layer in &mut params.layers {
            layer.weights.mapv_inplace(|_| rng.random_range(-scale..=scale));
            layer.biases.mapv_inplace(|_| rng.random_range(-scale..=scale));
            if let Some(var) = &mut layer.variances {
                var.mapv_inplace(|_| rng.random_range(0.25..=1.25));
            }
        }
        params.top_prior.mapv_inplace(|_| rng.random_range(-scale..=scale));
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 {
            return Err(Error::Config("layer_sizes needs at least two entries".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if self.layers.len() != sizes.len() - 1 {
            return Err(Error::Shape(format!(
                "{} layer parameter blocks for {} latent layers",
                self.layers.len(),
                sizes.len() - 1
            )));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.weights.dim() != (sizes[k], sizes[k + 1]) {
                return Err(Error::Shape(format!(
                    "layer {k} weights are {:?}, expected ({}, {})",
                    layer.weights.dim(),
                    sizes[k],
                    sizes[k + 1]
                )));
            }
            if layer.biases.len() != sizes[k] {
                return Err(Error::Shape(format!("layer {k} bias length mismatch")));
            }
            match (&layer.variances, k == 0 && self.visible_kind == VisibleKind::Gaussian) {
                (Some(var), true) => {
                    if var.len() != sizes[0] {
                        return Err(Error::Shape("variance length mismatch".into()));
                    }
                    if var.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                        return Err(Error::Config("variances must be positive and finite".into()));
                    }
                }
                (None, true) => {
                    return Err(Error::Config("gaussian visible layer requires variances".into()))
                }
                (Some(_), false) => {
                    return Err(Error::Config(format!(
                        "layer {k} carries variances but is not a gaussian visible layer"
                    )))
                }
                (None, false) => {}
            }
        }
        if self.top_prior.len() != *sizes.last().unwrap() {
            return Err(Error::Shape("top prior length mismatch".into()));
        }
        if let Some(head) = &self.label_head {
            if head.weights.ncols() != *sizes.last().unwrap()
                || head.weights.nrows() != head.biases.len()
                || head.biases.is_empty()
            {
                return Err(Error::Shape("label head dimensions mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn n_visible(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Number of latent layers `L`.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn latent_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..]
    }

    pub fn total_latent(&self) -> usize {
        self.latent_sizes().iter().sum()
    }

    pub fn variances(&self) -> Option<&Array1<f64>> {
        self.layers[0].variances.as_ref()
    }

    pub fn check_visible(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_visible() {
            return Err(Error::Shape(format!(
                "visible vector has length {}, model expects {}",
                x.len(),
                self.n_visible()
            )));
        }
        Ok(())
    }

    pub fn check_state(&self, state: &LatentState) -> Result<()> {
        let sizes = self.latent_sizes();
        if state.layers.len() != sizes.len()
            || state.layers.iter().zip(sizes).any(|(l, &n)| l.len() != n)
        {
            return Err(Error::Shape(format!(
                "latent state sizes {:?} do not match model {:?}",
                state.layers.iter().map(Vec::len).collect::<Vec<_>>(),
                sizes
            )));
        }
        if state.layers.iter().flatten().any(|&h| h > 1) {
            return Err(Error::Domain("latent state entries must be 0 or 1".into()));
        }
        Ok(())
    }

    /// Log-density of the visible layer under its conditional family, given
    /// pre-activations.
    pub(crate) fn visible_log_prob_from_activation(&self, x: &[f64], act: &[f64]) -> f64 {
        match self.visible_kind {
            VisibleKind::Binary => x.iter().zip(act).map(|(&v, &a)| log_bernoulli(v, a)).sum(),
            VisibleKind::Gaussian => {
                let var = self.layers[0].variances.as_ref().expect("validated");
                x.iter()
                    .zip(act)
                    .zip(var)
                    .map(|((&v, &a), &s2)| log_gaussian(v, a, s2))
                    .sum()
            }
        }
    }

    /// `sum_i log P(x_i | h1)`.
    pub fn cond_log_prob_visible(&self, x: &[f64], h1: &[u8]) -> Result<f64> {
        self.check_visible(x)?;
        if h1.len() != self.layer_sizes[1] {
            return Err(Error::Shape("first latent layer size mismatch".into()));
        }
        if self.visible_kind == VisibleKind::Gaussian && self.layers[0].variances.is_none() {
            return Err(Error::Config("gaussian visible layer requires variances".into()));
        }
        let act = self.layers[0].activation(h1);
        Ok(self.visible_log_prob_from_activation(x, &act))
    }

    /// Log of the full joint `P(x, h^1, ..., h^L)`.
    pub fn joint_log_prob(&self, x: &[f64], state: &LatentState) -> Result<f64> {
        self.check_visible(x)?;
        self.check_state(state)?;
        let mut total = self.cond_log_prob_visible(x, &state.layers[0])?;
        for k in 1..self.depth() {
            let act = self.layers[k].activation(&state.layers[k]);
            total += state.layers[k - 1]
                .iter()
                .zip(&act)
                .map(|(&h, &a)| log_bernoulli(h as f64, a))
                .sum::<f64>();
        }
        total += state
            .top()
            .iter()
            .zip(&self.top_prior)
            .map(|(&h, &d)| log_bernoulli(h as f64, d))
            .sum::<f64>();
        Ok(total)
    }

    /// Energy of a single-layer Gaussian model, so that
    /// `P(x, h) = exp(-E(x, h)) / Z_loc`.
    pub fn energy(&self, x: &[f64], h: &[u8]) -> Result<f64> {
        if self.visible_kind != VisibleKind::Gaussian || self.depth() != 1 {
            return Err(Error::Unsupported(
                "energy is defined for single-layer gaussian models".into(),
            ));
        }
        self.check_visible(x)?;
        if h.len() != self.layer_sizes[1] {
            return Err(Error::Shape("latent vector size mismatch".into()));
        }
        let layer = &self.layers[0];
        let var = layer.variances.as_ref().expect("validated");
        let wh = {
            let mut act = layer.activation(h);
            for (a, b) in act.iter_mut().zip(&layer.biases) {
                *a -= b;
            }
            act
        };
        let mut e = 0.0;
        for i in 0..x.len() {
            let r = x[i] - layer.biases[i];
            e += r * r / (2.0 * var[i]) - r / var[i] * wh[i] + wh[i] * wh[i] / (2.0 * var[i]);
        }
        let dh: f64 = h
            .iter()
            .zip(&self.top_prior)
            .map(|(&hj, &d)| hj as f64 * d)
            .sum();
        Ok(e - dh)
    }

    /// `log Z_loc = (n_d / 2) log 2 pi + sum_i log sigma_i + sum_j log(1 + exp d_j)`.
    pub fn log_local_partition(&self) -> Result<f64> {
        let var = self
            .variances()
            .ok_or_else(|| Error::Unsupported("local partition needs a gaussian model".into()))?;
        let n_d = self.n_visible() as f64;
        Ok(0.5 * n_d * math::LN_2PI
            + var.iter().map(|v| 0.5 * v.ln()).sum::<f64>()
            + self.top_prior.iter().map(|&d| math::softplus(d)).sum::<f64>())
    }

    pub fn label_logits(&self, top: &[u8]) -> Result<Vec<f64>> {
        let head = self
            .label_head
            .as_ref()
            .ok_or_else(|| Error::Config("model has no label head".into()))?;
        if top.len() != head.weights.ncols() {
            return Err(Error::Shape("top latent layer size mismatch".into()));
        }
        Ok(head.logits(top))
    }

    /// `log softmax(U h^L + c)[y]`.
    pub fn label_log_posterior(&self, y: usize, top: &[u8]) -> Result<f64> {
        let mut z = self.label_logits(top)?;
        if y >= z.len() {
            return Err(Error::Domain(format!("class {y} outside [0, {})", z.len())));
        }
        math::log_softmax(&mut z);
        Ok(z[y])
    }

    /// Draws `count` samples in topological order: top prior first, visible
    /// layer last. Sample `m` uses its own generator stream, so the result is
    /// a pure function of `(self, seed, count)`.
    pub fn ancestral_sample(
        &self,
        seed: u64,
        count: usize,
    ) -> Result<(DataBatch, Vec<LatentState>)> {
        if count == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        self.validate()?;
        let n_d = self.n_visible();
        let mut vectors = Array2::zeros((count, n_d));
        let mut states = Vec::with_capacity(count);
        for m in 0..count {
            let mut rng = seeded(seed, m as u64);
            let state = self.sample_latent(&mut rng);
            let act = self.layers[0].activation(&state.layers[0]);
            let mut row = vectors.row_mut(m);
            match self.visible_kind {
                VisibleKind::Binary => {
                    for (v, &a) in row.iter_mut().zip(&act) {
                        *v = f64::from(rng.random::<f64>() < sigmoid(a));
                    }
                }
                VisibleKind::Gaussian => {
                    let var = self.layers[0].variances.as_ref().expect("validated");
                    for ((v, &a), &s2) in row.iter_mut().zip(&act).zip(var) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = a + s2.sqrt() * z;
                    }
                }
            }
            states.push(state);
        }
        Ok((DataBatch::new(vectors, None)?, states))
    }

    /// Samples every latent layer top-down, stopping above the visible layer.
    pub fn sample_latent<R: Rng>(&self, rng: &mut R) -> LatentState {
        let depth = self.depth();
        let mut layers: Vec<Vec<u8>> = vec![Vec::new(); depth];
        layers[depth - 1] = self
            .top_prior
            .iter()
            .map(|&d| u8::from(rng.random::<f64>() < sigmoid(d)))
            .collect();
        for k in (1..depth).rev() {
            let act = self.layers[k].activation(&layers[k]);
            layers[k - 1] = act
                .iter()
                .map(|&a| u8::from(rng.random::<f64>() < sigmoid(a)))
                .collect();
        }
        LatentState { layers }
    }

    /// Conditional mean of the visible layer given `h^1`.
    pub fn visible_mean(&self, h1: &[u8]) -> Vec<f64> {
        let act = self.layers[0].activation(h1);
        match self.visible_kind {
            VisibleKind::Gaussian => act,
            VisibleKind::Binary => act.into_iter().map(sigmoid).collect(),
        }
    }

    /// Euclidean norm over every parameter.
    pub fn param_norm(&self) -> f64 {
        let mut sq = self.top_prior.iter().map(|v| v * v).sum::<f64>();
        for layer in &self.layers {
            sq += layer.weights.iter().map(|v| v * v).sum::<f64>();
            sq += layer.biases.iter().map(|v| v * v).sum::<f64>();
            if let Some(var) = &layer.variances {
                sq += var.iter().map(|v| v * v).sum::<f64>();
            }
        }
        if let Some(head) = &self.label_head {
            sq += head.weights.iter().map(|v| v * v).sum::<f64>();
            sq += head.biases.iter().map(|v| v * v).sum::<f64>();
        }
        sq.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn toy_gaussian() -> ModelParams {
        let mut p = ModelParams::zeros(VisibleKind::Gaussian, &[2, 2]).unwrap();
        p.layers[0].weights = array![[1.0, -1.0], [0.5, 2.0]];
        p.layers[0].biases = array![0.1, -0.3];
        p.layers[0].variances = Some(array![1.0, 0.25]);
        p
    }

    fn all_binary_vectors(n: usize) -> Vec<Vec<u8>> {
        (0..1u64 << n)
            .map(|code| (0..n).map(|i| ((code >> i) & 1) as u8).collect())
            .collect()
    }

    #[test]
    fn prior_probabilities() {
        assert_eq!(latent_prior_prob(0.0).unwrap(), 0.5);
        // 1 / (1 + e^-20) = 0.99999999793884...
        assert_abs_diff_eq!(latent_prior_prob(20.0).unwrap(), 0.999_999_997_938_846_9, epsilon = 1e-15);
        for d in [-4.0, -0.1, 3.3] {
            assert_abs_diff_eq!(
                latent_prior_prob(-d).unwrap(),
                1.0 - latent_prior_prob(d).unwrap(),
                epsilon = 1e-15
            );
        }
        assert!(matches!(latent_prior_prob(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(latent_prior_prob(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn conditional_examples() {
        let g = ModelParams::zeros(VisibleKind::Gaussian, &[1, 1]).unwrap();
        assert_abs_diff_eq!(
            g.cond_log_prob_visible(&[0.0], &[1]).unwrap(),
            -0.918_938_533_204_672_7,
            epsilon = 1e-12
        );
        let b = ModelParams::zeros(VisibleKind::Binary, &[1, 3]).unwrap();
        assert_abs_diff_eq!(b.cond_log_prob_visible(&[1.0], &[1, 0, 1]).unwrap(), 0.5f64.ln(), epsilon = 1e-15);

        // Independent scalar densities: means W h + b = (1.1, 0.2).
        let p = toy_gaussian();
        let density = |x: f64, mu: f64, var: f64| {
            (-(x - mu) * (x - mu) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        let expected = (density(1.0, 1.1, 1.0) * density(1.0, 0.2, 0.25)).ln();
        assert_abs_diff_eq!(p.cond_log_prob_visible(&[1.0, 1.0], &[1, 0]).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn missing_variances_is_a_config_error() {
        let mut p = toy_gaussian();
        p.layers[0].variances = None;
        assert!(matches!(p.cond_log_prob_visible(&[0.0, 0.0], &[0, 0]), Err(Error::Config(_))));
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn uniform_binary_joint() {
        let p = ModelParams::zeros(VisibleKind::Binary, &[2, 2]).unwrap();
        let s = LatentState { layers: vec![vec![1, 0]] };
        assert_abs_diff_eq!(p.joint_log_prob(&[0.0, 1.0], &s).unwrap(), 4.0 * 0.5f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn joint_shape_errors() {
        let p = ModelParams::zeros(VisibleKind::Binary, &[2, 2]).unwrap();
        let s = LatentState { layers: vec![vec![1, 0, 1]] };
        assert!(matches!(p.joint_log_prob(&[0.0, 1.0], &s), Err(Error::Shape(_))));
        let s = LatentState { layers: vec![vec![1, 0]] };
        assert!(matches!(p.joint_log_prob(&[0.0], &s), Err(Error::Shape(_))));
    }

    #[test]
    fn brute_force_normalization_single_and_deep() {
        let mut rng = seeded(11, 0);
        for sizes in [vec![3, 3], vec![2, 3, 2], vec![4, 2, 2, 2]] {
            let p = ModelParams::random(VisibleKind::Binary, &sizes, 2.0, &mut rng).unwrap();
            let mut total = 0.0;
            for x in all_binary_vectors(sizes[0]) {
                let x: Vec<f64> = x.into_iter().map(f64::from).collect();
                for code in 0..1u64 << p.total_latent() {
                    let s = LatentState::from_index(p.latent_sizes(), code);
                    total += p.joint_log_prob(&x, &s).unwrap().exp();
                }
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn energy_identity() {
        let mut rng = seeded(5, 0);
        for _ in 0..20 {
            let p = ModelParams::random(VisibleKind::Gaussian, &[2, 2], 1.5, &mut rng).unwrap();
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            for code in 0..4 {
                let s = LatentState::from_index(&[2], code);
                let lhs = -p.energy(&x, &s.layers[0]).unwrap() - p.log_local_partition().unwrap();
                assert_abs_diff_eq!(lhs, p.joint_log_prob(&x, &s).unwrap(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn energy_special_cases() {
        let p = toy_gaussian();
        let x = [0.7, -1.2];
        let e0 = p.energy(&x, &[0, 0]).unwrap();
        let expected = (0.7f64 - 0.1).powi(2) / 2.0 + (-1.2f64 + 0.3).powi(2) / (2.0 * 0.25);
        assert_abs_diff_eq!(e0, expected, epsilon = 1e-14);
        assert_eq!(p.energy(&[0.1, -0.3], &[0, 0]).unwrap(), 0.0);
        let b = ModelParams::zeros(VisibleKind::Binary, &[2, 2]).unwrap();
        assert!(matches!(b.energy(&[0.0, 1.0], &[0, 0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn label_head_posteriors() {
        let mut p = ModelParams::zeros(VisibleKind::Binary, &[3, 4]).unwrap();
        assert!(matches!(p.label_log_posterior(0, &[0; 4]), Err(Error::Config(_))));
        p.label_head = Some(LabelHead::zeros(10, 4));
        assert_abs_diff_eq!(p.label_log_posterior(3, &[1, 0, 1, 1]).unwrap(), -(10f64).ln(), epsilon = 1e-14);

        let mut rng = seeded(2, 0);
        let head = p.label_head.as_mut().unwrap();
        head.weights.mapv_inplace(|_| rng.random_range(-3.0..3.0));
        head.biases.mapv_inplace(|_| rng.random_range(-3.0..3.0));
        let h = [1, 1, 0, 1];
        let total: f64 = (0..10).map(|y| p.label_log_posterior(y, &h).unwrap().exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let logits = p.label_logits(&h).unwrap();
        let best_logit = (0..10).max_by(|&a, &b| logits[a].total_cmp(&logits[b])).unwrap();
        let best_post = (0..10)
            .max_by(|&a, &b| {
                p.label_log_posterior(a, &h).unwrap().total_cmp(&p.label_log_posterior(b, &h).unwrap())
            })
            .unwrap();
        assert_eq!(best_logit, best_post);
    }

    #[test]
    fn sampling_saturated_prior_and_determinism() {
        let mut p = ModelParams::zeros(VisibleKind::Binary, &[3, 4, 5]).unwrap();
        p.top_prior.fill(50.0);
        let (_, states) = p.ancestral_sample(9, 200).unwrap();
        assert!(states.iter().all(|s| s.top().iter().all(|&h| h == 1)));

        let (a, sa) = p.ancestral_sample(4, 50).unwrap();
        let (b, sb) = p.ancestral_sample(4, 50).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert!(matches!(p.ancestral_sample(4, 0), Err(Error::Config(_))));
    }

    #[test]
    fn sampling_zero_model_marginal() {
        let p = ModelParams::zeros(VisibleKind::Binary, &[4, 3]).unwrap();
        let (batch, _) = p.ancestral_sample(21, 100_000).unwrap();
        for i in 0..4 {
            let mean = batch.vectors.column(i).mean().unwrap();
            assert!((mean - 0.5).abs() < 0.005, "column {i}: {mean}");
        }
    }

    #[test]
    fn state_index_round_trip() {
        let sizes = [3, 2, 4];
        for code in [0u64, 1, 77, 511] {
            assert_eq!(LatentState::from_index(&sizes, code).to_index(), code);
        }
    }
}
