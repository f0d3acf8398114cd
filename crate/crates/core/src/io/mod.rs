//! File formats and dataset plumbing: IDX digit corpora, PGM images, patch
//! sampling, model files and CSV logs.

mod idx;
mod persist;
mod pgm;
mod trace;

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;

pub use idx::{binarize, downsample_2x2, intensities, labels, read_idx, write_idx, BinarizeMode, IdxTensor};
pub use persist::{
    load_model, load_net, model_from_json, model_to_json, save_model, save_net,
    MODEL_FORMAT_VERSION, NET_FORMAT_VERSION,
};
pub use pgm::{encode_pgm, parse_pgm, read_mask, read_pgm, write_pgm};
pub use trace::{hqs_log_csv, trace_csv, write_hqs_log, write_trace_csv};

use crate::error::{Error, Result};
use crate::model::DataBatch;
use crate::restoration::ImageGray;
use crate::rng::{seeded, stream_id};

/// Writes through a temporary file in the target directory, then renames it
/// into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchSpec {
    pub patch_size: usize,
    pub count: usize,
    pub seed: u64,
}

/// Draws `count` square patches with replacement, uniformly over every
/// (image, top-left position) pair. Rows are row-major flattened patches.
pub fn sample_patches(images: &[ImageGray], spec: &PatchSpec) -> Result<DataBatch> {
    if images.is_empty() {
        return Err(Error::Config("patch sampling needs at least one image".into()));
    }
    let s = spec.patch_size;
    if s == 0 || spec.count == 0 {
        return Err(Error::Config("patch size and count must be positive".into()));
    }
    if let Some(img) = images.iter().find(|i| i.width < s || i.height < s) {
        return Err(Error::Config(format!(
            "patch size {s} does not fit a {}x{} image",
            img.width, img.height
        )));
    }
    // Cumulative position counts, one entry per image.
    let mut cumulative = Vec::with_capacity(images.len());
    let mut total = 0usize;
    for img in images {
        total += (img.width - s + 1) * (img.height - s + 1);
        cumulative.push(total);
    }
    let mut rng = seeded(spec.seed, stream_id(&[0x9a7c]));
    let mut out = Array2::zeros((spec.count, s * s));
    for mut row in out.outer_iter_mut() {
        let r = rng.random_range(0..total);
        let k = cumulative.partition_point(|&c| c <= r);
        let img = &images[k];
        let local = r - if k == 0 { 0 } else { cumulative[k - 1] };
        let span = img.width - s + 1;
        let (px, py) = (local % span, local / span);
        for dy in 0..s {
            for dx in 0..s {
                row[dy * s + dx] = img.pixels[(py + dy) * img.width + px + dx];
            }
        }
    }
    DataBatch::new(out, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_position_returns_the_image() {
        let pixels: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let img = ImageGray::new(8, 8, pixels.clone()).unwrap();
        let spec = PatchSpec { patch_size: 8, count: 5, seed: 3 };
        let batch = sample_patches(std::slice::from_ref(&img), &spec).unwrap();
        for m in 0..5 {
            assert_eq!(batch.row(m), pixels.as_slice());
        }
        assert_eq!(batch, sample_patches(&[img], &spec).unwrap());
        assert!(matches!(sample_patches(&[], &spec), Err(Error::Config(_))));
    }

    #[test]
    fn positions_are_uniform() {
        // Each pixel value encodes its position, so the first entry of a
        // patch identifies the (image, top-left) pair it came from.
        let a = ImageGray::new(5, 4, (0..20).map(f64::from).collect()).unwrap();
        let b = ImageGray::new(4, 4, (100..116).map(f64::from).collect()).unwrap();
        let spec = PatchSpec { patch_size: 2, count: 100_000, seed: 11 };
        let batch = sample_patches(&[a, b], &spec).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for m in 0..batch.len() {
            *counts.entry(batch.row(m)[0] as i64).or_insert(0usize) += 1;
        }
        // 4x3 positions in `a` plus 3x3 in `b`.
        assert_eq!(counts.len(), 21);
        let expected = 100_000.0 / 21.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // Upper 1% point of chi-squared with 20 degrees of freedom.
        assert!(chi2 < 37.566, "{chi2}");
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
