//! Posterior, MAP and likelihood queries.

mod ca;
mod cache;
mod exact;
mod likelihood;
mod net;
mod pseudo;

pub use ca::{aug_ca_map, ca_map, ca_map_labeled, is_local_maximum, CaConfig, InferenceReport, SweepOrder};
pub use cache::FlipCache;
pub use exact::{
    enumerate_log_joint, exact_marginal, exact_posterior, ExactPosterior, DEFAULT_ENUMERATION_CAP,
};
pub use likelihood::{map_inference, marginal_log_likelihood_max, random_init, MapSource};
pub use net::{
    exact_bound, inference_net_map, train_inference_net, InferenceNet, NetLayer, NetTrainConfig,
    ScoreBaseline,
};
pub use pseudo::{pseudo_likelihood_posterior, pseudo_log_likelihood};

pub(crate) use net::draw_scores;
