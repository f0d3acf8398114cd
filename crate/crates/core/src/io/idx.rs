//! IDX containers: two zero bytes, a type code (0x08 = unsigned byte), a
//! dimension count, big-endian 32-bit dimensions, then the payload.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::model::DataBatch;
use crate::rng::{seeded, stream_id};

const UBYTE: u8 = 0x08;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub bytes: Vec<u8>,
}

impl IdxTensor {
    pub fn new(dims: Vec<usize>, bytes: Vec<u8>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Shape("an IDX tensor needs at least one dimension".into()));
        }
        let expected: usize = dims.iter().product();
        if bytes.len() != expected {
            return Err(Error::Shape(format!(
                "payload of {} bytes for dimensions {dims:?}",
                bytes.len()
            )));
        }
        Ok(IdxTensor { dims, bytes })
    }

    /// Number of items along the first axis.
    pub fn items(&self) -> usize {
        self.dims[0]
    }

    /// Bytes per item.
    pub fn item_len(&self) -> usize {
        self.dims[1..].iter().product()
    }

    pub fn parse(data: &[u8]) -> Result<Self> {
        let err = |offset: usize, reason: String| Error::Parse { offset, reason };
        if data.len() < 4 {
            return Err(err(data.len(), "file shorter than the 4-byte magic".into()));
        }
        if data[0] != 0 || data[1] != 0 {
            return Err(err(0, format!("bad magic {:02x}{:02x}", data[0], data[1])));
        }
        if data[2] != UBYTE {
            return Err(err(2, format!("unsupported element type 0x{:02x}", data[2])));
        }
        let ndims = data[3] as usize;
        if ndims == 0 {
            return Err(err(3, "zero dimensions".into()));
        }
        let header = 4 + 4 * ndims;
        if data.len() < header {
            return Err(err(data.len(), format!("header needs {header} bytes")));
        }
        let dims: Vec<usize> = (0..ndims)
            .map(|k| {
                let o = 4 + 4 * k;
                u32::from_be_bytes([data[o], data[o + 1], data[o + 2], data[o + 3]]) as usize
            })
            .collect();
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| err(4, "dimension product overflows".into()))?;
        let payload = &data[header..];
        if payload.len() < expected {
            return Err(err(
                data.len(),
                format!("payload truncated: {} of {expected} bytes", payload.len()),
            ));
        }
        if payload.len() > expected {
            return Err(err(header + expected, "trailing bytes after the payload".into()));
        }
        Ok(IdxTensor {
            dims,
            bytes: payload.to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.bytes.len());
        out.extend([0, 0, UBYTE, self.dims.len() as u8]);
        for &d in &self.dims {
            out.extend((d as u32).to_be_bytes());
        }
        out.extend(&self.bytes);
        out
    }
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxTensor> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    IdxTensor::parse(&data)
}

pub fn write_idx(path: impl AsRef<Path>, tensor: &IdxTensor) -> Result<()> {
    write_atomic(path, &tensor.to_bytes())
}

/// Halves both spatial axes of an `[n, h, w]` image tensor by averaging
/// 2x2 blocks (rounded to nearest).
pub fn downsample_2x2(images: &IdxTensor) -> Result<IdxTensor> {
    let [n, h, w] = images.dims[..] else {
        return Err(Error::Shape(format!("expected [n, h, w], got {:?}", images.dims)));
    };
    let (h2, w2) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * h2 * w2);
    for m in 0..n {
        let img = &images.bytes[m * h * w..(m + 1) * h * w];
        for y in 0..h2 {
            for x in 0..w2 {
                let s: u32 = [(2 * y, 2 * x), (2 * y, 2 * x + 1), (2 * y + 1, 2 * x), (2 * y + 1, 2 * x + 1)]
                    .iter()
                    .map(|&(r, c)| img[r * w + c] as u32)
                    .sum();
                out.push(((s + 2) / 4) as u8);
            }
        }
    }
    IdxTensor::new(vec![n, h2, w2], out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinarizeMode {
    /// Each pixel is on with probability `intensity / 255`.
    Bernoulli { seed: u64 },
    /// On when `intensity >= 128`.
    Threshold,
}

/// One row per item, entries in `{0, 1}`.
pub fn binarize(tensor: &IdxTensor, mode: BinarizeMode) -> Result<DataBatch> {
    let values: Vec<f64> = match mode {
        BinarizeMode::Threshold => tensor.bytes.iter().map(|&b| f64::from(b >= 128)).collect(),
        BinarizeMode::Bernoulli { seed } => {
            let mut rng = seeded(seed, stream_id(&[0xb1a]));
            tensor
                .bytes
                .iter()
                .map(|&b| f64::from(rng.random::<f64>() < b as f64 / 255.0))
                .collect()
        }
    };
    to_batch(tensor, values)
}

/// Intensities scaled by `1/255`.
pub fn intensities(tensor: &IdxTensor) -> Result<DataBatch> {
    to_batch(tensor, tensor.bytes.iter().map(|&b| b as f64 / 255.0).collect())
}

fn to_batch(tensor: &IdxTensor, values: Vec<f64>) -> Result<DataBatch> {
    let vectors = Array2::from_shape_vec((tensor.items(), tensor.item_len()), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    DataBatch::new(vectors, None)
}

/// Class labels from a one-dimensional label tensor.
pub fn labels(tensor: &IdxTensor) -> Result<Vec<usize>> {
    if tensor.dims.len() != 1 {
        return Err(Error::Shape(format!("label tensor has dimensions {:?}", tensor.dims)));
    }
    Ok(tensor.bytes.iter().map(|&b| b as usize).collect())
}
