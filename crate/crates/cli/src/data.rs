//! Loading inputs and models for the commands.

use std::path::{Path, PathBuf};

use drbn_core::inference::{train_inference_net, CaConfig, InferenceNet, MapSource, NetTrainConfig};
use drbn_core::io::{
    binarize, downsample_2x2, intensities, labels, load_model, load_net, read_idx, read_pgm,
    sample_patches, BinarizeMode, PatchSpec,
};
use drbn_core::{DataBatch, ImageGray, ModelParams, VisibleKind};
use serde::de::DeserializeOwned;

use crate::args::{Binarize, DataArgs, InferenceArgs, MapMethod};
use crate::Failure;

/// Reads a JSON configuration; an unreadable or malformed file is a
/// configuration error.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// PGM files of a directory, in name order.
pub fn read_image_dir(dir: &Path) -> Result<Vec<ImageGray>, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::data(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| is_pgm(p))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::data(format!("no .pgm files in {}", dir.display())));
    }
    paths.iter().map(|p| Ok(read_pgm(p)?)).collect()
}

/// Loads training or query vectors. With `n_visible` unset, whole images
/// (or IDX items) are the vectors; otherwise images larger than the input
/// size are sampled as square patches.
pub fn load_data(args: &DataArgs, kind: VisibleKind, n_visible: Option<usize>, seed: u64) -> Result<DataBatch, Failure> {
    let path = &args.data;
    let mut batch = if path.is_dir() || is_pgm(path) {
        let images = if path.is_dir() { read_image_dir(path)? } else { vec![read_pgm(path)?] };
        let n_visible = n_visible.unwrap_or(images[0].len());
        if images.iter().all(|i| i.len() == n_visible) {
            let rows: Vec<Vec<f64>> = images.into_iter().map(|i| i.pixels).collect();
            DataBatch::from_rows(&rows)?
        } else {
            let side = patch_side(n_visible)?;
            sample_patches(
                &images,
                &PatchSpec {
                    patch_size: side,
                    count: args.patch_count,
                    seed,
                },
            )?
        }
    } else {
        let mut tensor = read_idx(path)?;
        if args.downsample {
            tensor = downsample_2x2(&tensor)?;
        }
        match kind {
            VisibleKind::Gaussian => intensities(&tensor)?,
            VisibleKind::Binary => {
                let mode = match args.binarize {
                    Binarize::Bernoulli => BinarizeMode::Bernoulli { seed },
                    Binarize::Threshold => BinarizeMode::Threshold,
                };
                binarize(&tensor, mode)?
            }
        }
    };
    if let Some(path) = &args.labels {
        let y = labels(&read_idx(path)?)?;
        if y.len() != batch.len() {
            return Err(Failure::data(format!(
                "{} labels for {} data vectors",
                y.len(),
                batch.len()
            )));
        }
        batch = DataBatch::new(batch.vectors, Some(y))?;
    }
    if let Some(n) = args.limit {
        let n = n.min(batch.len());
        batch = batch.subset(&(0..n).collect::<Vec<_>>());
    }
    if let Some(n) = n_visible.filter(|&n| n != batch.dim()) {
        return Err(Failure::data(format!(
            "data vectors have {} entries, the model expects {n}",
            batch.dim()
        )));
    }
    Ok(batch)
}

pub fn patch_side(n_visible: usize) -> Result<usize, Failure> {
    let side = (n_visible as f64).sqrt().round() as usize;
    if side * side != n_visible {
        return Err(Failure::data(format!("{n_visible} visible units do not form a square patch")));
    }
    Ok(side)
}

pub fn model(path: &Path) -> Result<ModelParams, Failure> {
    Ok(load_model(path)?)
}

pub fn ca_config(args: &InferenceArgs, seed: u64) -> CaConfig {
    CaConfig {
        max_sweeps: args.sweeps,
        restarts: args.restarts,
        seed,
        ..CaConfig::default()
    }
}

/// Ancestral samples used to fit an inference network when none is saved.
const NET_SAMPLES: usize = 2000;

/// The saved network, or one trained on samples from the model.
pub fn obtain_net(params: &ModelParams, path: Option<&Path>, seed: u64) -> Result<InferenceNet, Failure> {
    if let Some(path) = path {
        let net = load_net(path)?;
        net.check(params)?;
        return Ok(net);
    }
    let (samples, _) = params.ancestral_sample(seed, NET_SAMPLES)?;
    let cfg = NetTrainConfig {
        seed,
        ..NetTrainConfig::default()
    };
    let (net, _) = train_inference_net(params, &samples, &cfg)?;
    Ok(net)
}

/// Inference network, when the method uses one.
pub fn net_for(args: &InferenceArgs, params: &ModelParams, seed: u64) -> Result<Option<InferenceNet>, Failure> {
    match args.map_method {
        MapMethod::In | MapMethod::Augca => Ok(Some(obtain_net(params, args.net.as_deref(), seed)?)),
        MapMethod::Ca | MapMethod::Exact => Ok(None),
    }
}

pub fn map_source<'a>(args: &InferenceArgs, net: Option<&'a InferenceNet>, seed: u64) -> Result<MapSource<'a>, Failure> {
    let cfg = ca_config(args, seed);
    cfg.validate()?;
    Ok(match (args.map_method, net) {
        (MapMethod::Ca, _) => MapSource::Ca(cfg),
        (MapMethod::Augca, Some(net)) => MapSource::AugCa { net, cfg },
        (MapMethod::Exact, _) => MapSource::Exact,
        (MapMethod::Augca, None) => return Err(Failure::config("augca needs an inference network")),
        (MapMethod::In, _) => return Err(Failure::config("this command does not support --map-method in")),
    })
}
