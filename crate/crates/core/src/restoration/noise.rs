use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::image::ImageGray;
use crate::error::{Error, Result};
use crate::rng::{seeded, stream_id};

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    /// Additive `N(0, sigma^2)` noise on exactly `round(fraction * N)`
    /// pixels chosen without replacement.
    Gaussian { sigma: f64, fraction: f64 },
    /// Additive `N(0, sigma^2)` noise on one `size x size` block at a random
    /// position.
    Block { size: usize, sigma: f64 },
    /// Pixels under the mask are painted white.
    TextOverlay { mask: Vec<bool> },
}

impl NoiseModel {
    /// Noise standard deviation, where the model has one.
    pub fn sigma(&self) -> Option<f64> {
        match self {
            NoiseModel::Gaussian { sigma, .. } | NoiseModel::Block { sigma, .. } => Some(*sigma),
            NoiseModel::TextOverlay { .. } => None,
        }
    }
}

/// Parses `gaussian:SIGMA:FRACTION` and `block:SIZE:SIGMA`. Text overlays
/// need a mask image and are built by the caller.
impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| -> Result<f64> {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {t:?} in noise spec {s:?}")))
        };
        match parts.as_slice() {
            ["gaussian", sigma, fraction] => Ok(NoiseModel::Gaussian {
                sigma: num(sigma)?,
                fraction: num(fraction)?,
            }),
            ["block", size, sigma] => Ok(NoiseModel::Block {
                size: size
                    .parse()
                    .map_err(|_| Error::Config(format!("bad block size {size:?}")))?,
                sigma: num(sigma)?,
            }),
            _ => Err(Error::Config(format!(
                "noise spec {s:?} is not gaussian:SIGMA:FRACTION or block:SIZE:SIGMA"
            ))),
        }
    }
}

/// Applies the noise model; returns the corrupted image and the mask of
/// touched pixels. Values are not clamped.
pub fn corrupt(image: &ImageGray, noise: &NoiseModel, seed: u64) -> Result<(ImageGray, Vec<bool>)> {
    let mut out = image.clone();
    let mut mask = vec![false; image.len()];
    let mut rng = seeded(seed, stream_id(&[0xc022]));
    match noise {
        NoiseModel::Gaussian { sigma, fraction } => {
            if !(*sigma >= 0.0) || !(0.0..=1.0).contains(fraction) {
                return Err(Error::Config(format!(
                    "gaussian noise needs sigma >= 0 and fraction in [0, 1], got {sigma}, {fraction}"
                )));
            }
            let count = (fraction * image.len() as f64).round() as usize;
            for i in sample(&mut rng, image.len(), count).into_iter() {
                let z: f64 = StandardNormal.sample(&mut rng);
                out.pixels[i] += sigma * z;
                mask[i] = true;
            }
        }
        NoiseModel::Block { size, sigma } => {
            if *size == 0 || *size > image.width || *size > image.height {
                return Err(Error::Config(format!(
                    "block of {size} does not fit a {}x{} image",
                    image.width, image.height
                )));
            }
            if !(*sigma >= 0.0) {
                return Err(Error::Config(format!("block sigma must be >= 0, got {sigma}")));
            }
            let x0 = rng.random_range(0..=image.width - size);
            let y0 = rng.random_range(0..=image.height - size);
            for y in y0..y0 + size {
                for x in x0..x0 + size {
                    let i = y * image.width + x;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    out.pixels[i] += sigma * z;
                    mask[i] = true;
                }
            }
        }
        NoiseModel::TextOverlay { mask: text } => {
            if text.len() != image.len() {
                return Err(Error::Shape(format!(
                    "text mask has {} pixels, image has {}",
                    text.len(),
                    image.len()
                )));
            }
            for (i, &on) in text.iter().enumerate() {
                if on {
                    out.pixels[i] = 1.0;
                    mask[i] = true;
                }
            }
        }
    }
    Ok((out, mask))
}

/// 3x5 glyphs, one row per entry, most significant of the three bits on
/// the left.
fn glyph(c: char) -> [u8; 5] {
    match c.to_ascii_uppercase() {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 2, 2, 2],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        'A' => [2, 5, 7, 5, 5],
        'B' => [6, 5, 6, 5, 6],
        'C' => [7, 4, 4, 4, 7],
        'D' => [6, 5, 5, 5, 6],
        'E' => [7, 4, 6, 4, 7],
        'F' => [7, 4, 6, 4, 4],
        'G' => [7, 4, 5, 5, 7],
        'H' => [5, 5, 7, 5, 5],
        'I' => [7, 2, 2, 2, 7],
        'J' => [1, 1, 1, 5, 7],
        'K' => [5, 5, 6, 5, 5],
        'L' => [4, 4, 4, 4, 7],
        'M' => [5, 7, 7, 5, 5],
        'N' => [6, 5, 5, 5, 5],
        'O' => [7, 5, 5, 5, 7],
        'P' => [7, 5, 7, 4, 4],
        'Q' => [7, 5, 5, 7, 1],
        'R' => [6, 5, 6, 5, 5],
        'S' => [7, 4, 7, 1, 7],
        'T' => [7, 2, 2, 2, 2],
        'U' => [5, 5, 5, 5, 7],
        'V' => [5, 5, 5, 5, 2],
        'W' => [5, 5, 7, 7, 5],
        'X' => [5, 5, 2, 5, 5],
        'Y' => [5, 5, 2, 2, 2],
        'Z' => [7, 1, 2, 4, 7],
        _ => [0; 5],
    }
}

/// Renders `text` repeatedly in rows of 3x5 glyphs across the image, with
/// one blank column between glyphs and `line_gap` blank rows between lines.
pub fn text_mask(width: usize, height: usize, text: &str, line_gap: usize) -> Vec<bool> {
    let mut mask = vec![false; width * height];
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return mask;
    }
    let mut k = 0;
    let mut top = 1;
    while top + 5 <= height {
        let mut left = 1;
        while left + 3 <= width {
            let g = glyph(chars[k % chars.len()]);
            for (dy, bits) in g.iter().enumerate() {
                for dx in 0..3 {
                    if bits >> (2 - dx) & 1 == 1 {
                        mask[(top + dy) * width + left + dx] = true;
                    }
                }
            }
            k += 1;
            left += 4;
        }
        top += 5 + line_gap;
    }
    mask
}
