//! Deep regression Bayesian networks (DRBNs).
//!
//! Directed generative models with binary latent layers, learned by max-max
//! (hard-assignment) marginal likelihood optimization and queried through
//! coordinate-ascent MAP inference. The crate also carries the inference
//! network used to initialize coordinate ascent, exact enumeration oracles
//! for small models, and an EPLL patch-prior image restoration pipeline.

pub mod error;
pub mod inference;
pub mod io;
pub mod learning;
pub mod math;
pub mod model;
pub mod restoration;
pub mod rng;

pub use error::{Error, Result};
pub use inference::{
    aug_ca_map, ca_map, exact_marginal, exact_posterior, inference_net_map,
    marginal_log_likelihood_max, pseudo_likelihood_posterior, train_inference_net, CaConfig,
    ExactPosterior, FlipCache, InferenceNet, InferenceReport, MapSource, NetTrainConfig,
    SweepOrder,
};
pub use io::{load_model, read_idx, read_pgm, sample_patches, save_model, write_pgm, IdxTensor, PatchSpec};
pub use learning::{
    classify, finetune_global, finetune_supervised, fit_exact_tiny, fit_rbn_unsupervised,
    fit_variational_baseline, pretrain_layerwise, EStep, LearnTrace, MStep, TrainConfig,
};
pub use model::{
    latent_prior_prob, DataBatch, LabelHead, LatentState, LayerParams, ModelParams, VisibleKind,
};
pub use restoration::{corrupt, psnr, restore_hqs, HqsStep, ImageGray, NoiseModel, RestorationProblem};

