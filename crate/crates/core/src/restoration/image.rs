use ndarray::Array2;

use crate::error::{Error, Result};

/// Grayscale image, row-major. Pixel values are nominally in `[0, 1]`;
/// intermediate results may leave that range and are clamped when written.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl ImageGray {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape("image dimensions must be positive".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("pixel value {bad} is not finite")));
        }
        Ok(ImageGray {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn clamped(&self) -> ImageGray {
        ImageGray {
            pixels: self.pixels.iter().map(|p| p.clamp(0.0, 1.0)).collect(),
            ..self.clone()
        }
    }

    pub fn same_shape(&self, other: &ImageGray) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Shape(format!(
                "{}x{} image versus {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Top-left corners along one axis: every `stride` steps, plus the last
/// position so that every pixel is covered.
fn axis_positions(len: usize, size: usize, stride: usize) -> Vec<usize> {
    let last = len - size;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().expect("non-empty") != last {
        out.push(last);
    }
    out
}

/// Top-left corners of all patches lying fully inside the image.
pub fn patch_positions(width: usize, height: usize, size: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if size == 0 || size > width.min(height) {
        return Err(Error::Shape(format!(
            "patch size {size} does not fit a {width}x{height} image"
        )));
    }
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let xs = axis_positions(width, size, stride);
    let ys = axis_positions(height, size, stride);
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect())
}

/// One flattened patch per row.
pub fn extract_patches(image: &ImageGray, size: usize, stride: usize) -> Result<Array2<f64>> {
    let positions = patch_positions(image.width, image.height, size, stride)?;
    let mut out = Array2::zeros((positions.len(), size * size));
    for (k, &(px, py)) in positions.iter().enumerate() {
        let mut row = out.row_mut(k);
        for dy in 0..size {
            for dx in 0..size {
                row[dy * size + dx] = image.get(px + dx, py + dy);
            }
        }
    }
    Ok(out)
}

/// Per-pixel sum of patch values and per-pixel patch count.
pub fn accumulate_patches(
    patches: &Array2<f64>,
    width: usize,
    height: usize,
    size: usize,
    stride: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let positions = patch_positions(width, height, size, stride)?;
    if patches.dim() != (positions.len(), size * size) {
        return Err(Error::Shape(format!(
            "{:?} patch matrix, expected ({}, {})",
            patches.dim(),
            positions.len(),
            size * size
        )));
    }
    let mut sum = vec![0.0; width * height];
    let mut count = vec![0.0; width * height];
    for (k, &(px, py)) in positions.iter().enumerate() {
        let row = patches.row(k);
        for dy in 0..size {
            for dx in 0..size {
                let i = (py + dy) * width + px + dx;
                sum[i] += row[dy * size + dx];
                count[i] += 1.0;
            }
        }
    }
    Ok((sum, count))
}

/// Averages overlapping patches back into an image.
pub fn assemble_patches(
    patches: &Array2<f64>,
    width: usize,
    height: usize,
    size: usize,
    stride: usize,
) -> Result<ImageGray> {
    let (sum, count) = accumulate_patches(patches, width, height, size, stride)?;
    let pixels = sum.iter().zip(&count).map(|(s, c)| s / c).collect();
    ImageGray::new(width, height, pixels)
}

/// `10 log10(1 / MSE)` for images in `[0, 1]`, capped at 99 dB.
pub fn psnr(a: &ImageGray, b: &ImageGray) -> Result<f64> {
    a.same_shape(b)?;
    let mse = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    if mse < 1e-12 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

pub const PSNR_CAP: f64 = 99.0;
