use std::f64::consts::PI;

use rand::Rng;

use super::image::ImageGray;
use crate::rng::{seeded, stream_id};

/// Smooth synthetic texture: a sum of two or three oriented sinusoidal
/// gratings, rescaled into `[0.15, 0.85]`.
pub fn synthetic_texture(width: usize, height: usize, seed: u64) -> ImageGray {
    let mut rng = seeded(seed, stream_id(&[0x7e47]));
    let waves: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(2..=3))
        .map(|_| {
            let angle = rng.random_range(0.0..PI);
            let freq = rng.random_range(0.15..0.55);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.5..1.0);
            (angle.cos() * freq, angle.sin() * freq, phase, amp)
        })
        .collect();
    let mut pixels: Vec<f64> = (0..width * height)
        .map(|i| {
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            waves.iter().map(|(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin()).sum()
        })
        .collect();
    let lo = pixels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    for p in &mut pixels {
        *p = 0.15 + 0.7 * (*p - lo) / span;
    }
    ImageGray::new(width, height, pixels).expect("finite by construction")
}
