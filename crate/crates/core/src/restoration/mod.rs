//! EPLL image restoration with a DRBN patch prior.

mod hqs;
mod image;
mod noise;
mod texture;

pub use hqs::{
    default_beta_schedule, epll, generate, reconstruct, reconstruct_image, restore_hqs, HqsStep,
    RestorationProblem, DEFAULT_ASSUMED_SIGMA,
};
pub use image::{
    accumulate_patches, assemble_patches, extract_patches, patch_positions, psnr, ImageGray,
    PSNR_CAP,
};
pub use noise::{corrupt, text_mask, NoiseModel};
pub use texture::synthetic_texture;
