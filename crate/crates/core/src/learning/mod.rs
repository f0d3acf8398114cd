//! Parameter estimation.

mod baselines;
mod config;
mod deep;
mod grad;
mod maxmax;
mod supervised;

pub use baselines::{
    exact_bound_grad, exact_log_likelihood_grad, exact_mean_log_likelihood, fit_exact_tiny,
    fit_variational_baseline, max_mean_log_likelihood,
};
pub use config::{EStep, EpochRecord, LearnTrace, MStep, TrainConfig};
pub use deep::{finetune_global, pretrain_layerwise};
pub use grad::{
    accumulate_joint_grad, apply_gradient, finite_difference, max_abs_diff, param_vector,
    set_param_vector, LayerGrad, ModelGrad, UpdateMask,
};
pub use maxmax::{fit_rbn_unsupervised, init_params, m_step_binary_sgd, m_step_gaussian};
pub use supervised::{
    classify, classify_batch, finetune_supervised, finetune_supervised_masked, supervised_objective,
};
