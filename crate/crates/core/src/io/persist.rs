//! JSON model and inference-network files.
//!
//! Floats are written in shortest round-trip form and parsed with exact
//! rounding, so a save/load cycle reproduces every parameter bit for bit.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};
use crate::inference::InferenceNet;
use crate::model::{LabelHead, LayerParams, ModelParams, VisibleKind};

pub const MODEL_FORMAT_VERSION: u64 = 1;
pub const NET_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variances: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelHeadFile {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u64,
    visible_kind: VisibleKind,
    layer_sizes: Vec<usize>,
    layers: Vec<LayerFile>,
    top_prior: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_head: Option<LabelHeadFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    format_version: u64,
    net: InferenceNet,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f64>>, what: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Persistence(format!("{what} rows have unequal lengths")));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Persistence(format!("{what}: {e}")))
}

/// Reads `format_version` before anything else so a newer file is refused
/// by version rather than by whatever field changed.
fn check_version(text: &str, supported: u64, what: &str) -> Result<()> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Persistence(format!("malformed {what} file: {e}")))?;
    match value.get("format_version") {
        Some(v) if v.as_u64() == Some(supported) => Ok(()),
        Some(v) => Err(Error::Persistence(format!(
            "{what} file has format_version {v}; this build reads version {supported}"
        ))),
        None => Err(Error::Persistence(format!("{what} file has no format_version"))),
    }
}

pub fn model_to_json(params: &ModelParams) -> Result<String> {
    params.validate()?;
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        visible_kind: params.visible_kind,
        layer_sizes: params.layer_sizes.clone(),
        layers: params
            .layers
            .iter()
            .map(|l| LayerFile {
                weights: rows(&l.weights),
                biases: l.biases.to_vec(),
                variances: l.variances.as_ref().map(|v| v.to_vec()),
            })
            .collect(),
        top_prior: params.top_prior.to_vec(),
        label_head: params.label_head.as_ref().map(|h| LabelHeadFile {
            weights: rows(&h.weights),
            biases: h.biases.to_vec(),
        }),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Persistence(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<ModelParams> {
    check_version(text, MODEL_FORMAT_VERSION, "model")?;
    let file: ModelFile = serde_json::from_str(text)
        .map_err(|e| Error::Persistence(format!("malformed model file: {e}")))?;
    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(k, l)| {
            Ok(LayerParams {
                weights: matrix(l.weights, &format!("layer {k} weights"))?,
                biases: Array1::from(l.biases),
                variances: l.variances.map(Array1::from),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let label_head = file
        .label_head
        .map(|h| {
            Ok::<_, Error>(LabelHead {
                weights: matrix(h.weights, "label head weights")?,
                biases: Array1::from(h.biases),
            })
        })
        .transpose()?;
    let params = ModelParams {
        visible_kind: file.visible_kind,
        layer_sizes: file.layer_sizes,
        layers,
        top_prior: Array1::from(file.top_prior),
        label_head,
    };
    params
        .validate()
        .map_err(|e| Error::Persistence(format!("model file is inconsistent: {e}")))?;
    Ok(params)
}

pub fn save_model(path: impl AsRef<Path>, params: &ModelParams) -> Result<()> {
    write_atomic(path, model_to_json(params)?.as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

pub fn save_net(path: impl AsRef<Path>, net: &InferenceNet) -> Result<()> {
    let file = NetFile {
        format_version: NET_FORMAT_VERSION,
        net: net.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::Persistence(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

/// Shape against a model is checked by `InferenceNet::check`.
pub fn load_net(path: impl AsRef<Path>) -> Result<InferenceNet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    check_version(&text, NET_FORMAT_VERSION, "inference network")?;
    let file: NetFile = serde_json::from_str(&text)
        .map_err(|e| Error::Persistence(format!("malformed inference network file: {e}")))?;
    Ok(file.net)
}
