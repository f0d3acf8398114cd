//! EPLL restoration by half-quadratic splitting, plus reconstruction and
//! generation with a trained patch prior.

use rayon::prelude::*;

use super::image::{accumulate_patches, extract_patches, ImageGray};
use super::noise::NoiseModel;
use crate::error::{Error, Result};
use crate::inference::{map_inference, random_init, ca_map, CaConfig, InferenceNet, MapSource};
use crate::model::{ModelParams, VisibleKind};
use crate::rng::{seeded, stream_id};

/// `{1, 4, 8, 16, 32} / sigma_n^2`.
pub fn default_beta_schedule(sigma_n: f64) -> Vec<f64> {
    [1.0, 4.0, 8.0, 16.0, 32.0].iter().map(|m| m / (sigma_n * sigma_n)).collect()
}

/// Noise level assumed for the schedule when the noise model has none.
pub const DEFAULT_ASSUMED_SIGMA: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct RestorationProblem {
    pub corrupted: ImageGray,
    pub noise_model: NoiseModel,
    /// Pixels known to be corrupted. Their data term is dropped, so they are
    /// filled in from the prior. `None` weights every pixel equally.
    pub mask: Option<Vec<bool>>,
    pub lambda: f64,
    pub patch_size: usize,
    pub stride: usize,
    pub beta_schedule: Vec<f64>,
}

impl RestorationProblem {
    pub fn new(corrupted: ImageGray, noise_model: NoiseModel, mask: Option<Vec<bool>>) -> Self {
        let sigma = noise_model.sigma().unwrap_or(DEFAULT_ASSUMED_SIGMA);
        RestorationProblem {
            corrupted,
            noise_model,
            mask,
            lambda: 1e6,
            patch_size: 8,
            stride: 1,
            beta_schedule: default_beta_schedule(sigma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let img = &self.corrupted;
        if self.patch_size == 0 || self.patch_size > img.width.min(img.height) {
            return Err(Error::Shape(format!(
                "patch size {} does not fit a {}x{} image",
                self.patch_size, img.width, img.height
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.beta_schedule.is_empty() || self.beta_schedule.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Config("beta schedule must be a non-empty list of positive values".into()));
        }
        if let Some(mask) = &self.mask {
            if mask.len() != img.len() {
                return Err(Error::Shape(format!(
                    "mask has {} pixels, image has {}",
                    mask.len(),
                    img.len()
                )));
            }
        }
        Ok(())
    }
}

/// One outer step of the splitting schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct HqsStep {
    pub beta: f64,
    /// `lambda/2 ||x - x~||^2 - EPLL(x)` after the step.
    pub objective: f64,
    pub psnr: Option<f64>,
}

fn patch_side(prior: &ModelParams) -> Result<usize> {
    let n = prior.n_visible();
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::Shape(format!("prior has {n} visible units, not a square patch")));
    }
    Ok(side)
}

/// Per-row source with decorrelated random starts.
fn source_for<'a>(source: &MapSource<'a>, seed: u64, step: u64, k: usize) -> MapSource<'a> {
    match source {
        MapSource::Ca(cfg) => MapSource::Ca(cfg.with_seed(stream_id(&[seed, step, k as u64]))),
        MapSource::AugCa { net, cfg } => MapSource::AugCa {
            net,
            cfg: cfg.with_seed(stream_id(&[seed, step, k as u64])),
        },
        MapSource::Exact => MapSource::Exact,
    }
}

fn epll_with(image: &ImageGray, prior: &ModelParams, source: &MapSource, seed: u64, step: u64) -> Result<f64> {
    let size = patch_side(prior)?;
    let patches = extract_patches(image, size, 1)?;
    let values: Vec<f64> = (0..patches.nrows())
        .into_par_iter()
        .map(|k| {
            let row = patches.row(k);
            let y = row.as_slice().expect("standard layout");
            Ok(map_inference(y, prior, &source_for(source, seed, step, k))?.joint_log_prob)
        })
        .collect::<Result<_>>()?;
    Ok(values.iter().sum())
}

/// `sum_i max_h log P(y_i, h)` over every overlapping patch (stride 1).
pub fn epll(image: &ImageGray, prior: &ModelParams, source: &MapSource) -> Result<f64> {
    epll_with(image, prior, source, 0, u64::MAX)
}

/// Half-quadratic splitting on `lambda/2 ||x - x~||^2 - EPLL(x)`. Returns
/// the restored image (clamped to `[0, 1]`) and one log entry per step.
pub fn restore_hqs(
    problem: &RestorationProblem,
    prior: &ModelParams,
    source: &MapSource,
    clean: Option<&ImageGray>,
    seed: u64,
) -> Result<(ImageGray, Vec<HqsStep>)> {
    problem.validate()?;
    if prior.visible_kind != VisibleKind::Gaussian {
        return Err(Error::Unsupported("restoration needs a Gaussian patch prior".into()));
    }
    let size = patch_side(prior)?;
    if size != problem.patch_size {
        return Err(Error::Shape(format!(
            "prior models {size}x{size} patches, problem uses {}",
            problem.patch_size
        )));
    }
    if let Some(c) = clean {
        c.same_shape(&problem.corrupted)?;
    }
    let observed = &problem.corrupted;
    let (w, h) = (observed.width, observed.height);
    let data_weight: Vec<f64> = match &problem.mask {
        Some(mask) => mask.iter().map(|&m| if m { 0.0 } else { problem.lambda }).collect(),
        None => vec![problem.lambda; observed.len()],
    };
    let var = prior.variances().expect("Gaussian prior").to_vec();
    let mut x = observed.clone();
    let mut log = Vec::with_capacity(problem.beta_schedule.len());
    for (step, &beta) in problem.beta_schedule.iter().enumerate() {
        let patches = extract_patches(&x, size, problem.stride)?;
        let rows: Vec<Vec<f64>> = (0..patches.nrows())
            .into_par_iter()
            .map(|k| {
                let row = patches.row(k);
                let y = row.as_slice().expect("standard layout");
                let report = map_inference(y, prior, &source_for(source, seed, step as u64, k))?;
                let mean = prior.visible_mean(&report.map_state.layers[0]);
                Ok(y.iter()
                    .zip(&mean)
                    .zip(&var)
                    .map(|((yi, mi), s2)| (beta * yi + mi / s2) / (beta + 1.0 / s2))
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut z = patches;
        for (k, row) in rows.iter().enumerate() {
            z.row_mut(k).iter_mut().zip(row).for_each(|(d, s)| *d = *s);
        }
        let (sum, count) = accumulate_patches(&z, w, h, size, problem.stride)?;
        for i in 0..x.len() {
            x.pixels[i] = (data_weight[i] * observed.pixels[i] + beta * sum[i]) / (data_weight[i] + beta * count[i]);
        }
        let fidelity: f64 = 0.5
            * data_weight
                .iter()
                .zip(&x.pixels)
                .zip(&observed.pixels)
                .map(|((wt, a), b)| wt * (a - b).powi(2))
                .sum::<f64>();
        let objective = fidelity - epll_with(&x, prior, source, seed, (step as u64) << 32 | 1)?;
        if !objective.is_finite() || x.pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!(
                "objective is not finite at beta step {step} (beta = {beta})"
            )));
        }
        let psnr = clean.map(|c| super::image::psnr(&x.clamped(), c)).transpose()?;
        log::debug!("hqs step {step}: beta {beta:.4}, objective {objective:.4}");
        log.push(HqsStep { beta, objective, psnr });
    }
    Ok((x.clamped(), log))
}

/// `argmax_x P(x | h*)` with `h*` from coordinate ascent, started from the
/// inference network when one is given.
pub fn reconstruct(x: &[f64], params: &ModelParams, net: Option<&InferenceNet>, cfg: &CaConfig) -> Result<Vec<f64>> {
    let report = match net {
        Some(net) => crate::inference::aug_ca_map(x, params, net, cfg)?,
        None => ca_map(x, params, &random_init(params, cfg.seed), cfg)?,
    };
    let mean = params.visible_mean(&report.map_state.layers[0]);
    Ok(match params.visible_kind {
        VisibleKind::Gaussian => mean,
        VisibleKind::Binary => mean.into_iter().map(|p| f64::from(p >= 0.5)).collect(),
    })
}

/// Reconstructs a whole image: directly when it matches the model's visible
/// size, otherwise patch by patch with overlapping patches averaged.
pub fn reconstruct_image(
    image: &ImageGray,
    params: &ModelParams,
    net: Option<&InferenceNet>,
    cfg: &CaConfig,
    stride: usize,
) -> Result<ImageGray> {
    if image.len() == params.n_visible() {
        let pixels = reconstruct(&image.pixels, params, net, cfg)?;
        return ImageGray::new(image.width, image.height, pixels);
    }
    let size = patch_side(params)?;
    let patches = extract_patches(image, size, stride)?;
    let rows: Vec<Vec<f64>> = (0..patches.nrows())
        .into_par_iter()
        .map(|k| {
            let row = patches.row(k);
            let c = cfg.with_seed(stream_id(&[cfg.seed, k as u64]));
            reconstruct(row.as_slice().expect("standard layout"), params, net, &c)
        })
        .collect::<Result<_>>()?;
    let mut out = patches;
    for (k, row) in rows.iter().enumerate() {
        out.row_mut(k).iter_mut().zip(row).for_each(|(d, s)| *d = *s);
    }
    super::image::assemble_patches(&out, image.width, image.height, size, stride)
}

/// Ancestral samples of the latent layers, emitting the conditional mean of
/// the visible layer as an image.
pub fn generate(params: &ModelParams, seed: u64, count: usize, width: usize, height: usize) -> Result<Vec<ImageGray>> {
    params.validate()?;
    if width * height != params.n_visible() {
        return Err(Error::Shape(format!(
            "{width}x{height} images for {} visible units",
            params.n_visible()
        )));
    }
    (0..count)
        .map(|m| {
            let mut rng = seeded(seed, stream_id(&[0x6e4, m as u64]));
            let state = params.sample_latent(&mut rng);
            ImageGray::new(width, height, params.visible_mean(&state.layers[0]))
        })
        .collect()
}
