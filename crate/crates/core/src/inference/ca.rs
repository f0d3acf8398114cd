//! Coordinate-ascent MAP inference.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::cache::FlipCache;
use super::net::InferenceNet;
use crate::error::{Error, Result};
use crate::model::{LatentState, ModelParams};
use crate::rng::{seeded, stream_id};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Layers bottom-up, units in index order.
    Fixed,
    /// A fresh seeded permutation of all latent units every sweep.
    Permuted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaConfig {
    pub max_sweeps: usize,
    /// Zero: stop on the first sweep that flips nothing. Positive: also stop
    /// once a sweep improves the objective by less than `tol`.
    pub tol: f64,
    pub sweep_order: SweepOrder,
    /// Runs beyond the first start from seeded random states.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for CaConfig {
    fn default() -> Self {
        CaConfig {
            max_sweeps: 50,
            tol: 0.0,
            sweep_order: SweepOrder::Fixed,
            restarts: 1,
            seed: 0,
        }
    }
}

impl CaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("tol must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        CaConfig {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub map_state: LatentState,
    /// Objective at `map_state`: `log P(x, h)`, plus `log P(y | h^L)` when a
    /// class was supplied.
    pub joint_log_prob: f64,
    /// Full sweeps performed by the winning run.
    pub iterations_used: usize,
    /// Single-unit flips accepted by the winning run.
    pub flips: usize,
    pub converged: bool,
    /// Objective at the start and after every sweep of the winning run.
    pub trace: Option<Vec<f64>>,
}

struct Run {
    state: LatentState,
    value: f64,
    sweeps: usize,
    flips: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn run_from(
    params: &ModelParams,
    x: &[f64],
    class: Option<usize>,
    init: LatentState,
    cfg: &CaConfig,
    restart: usize,
) -> Result<Run> {
    let mut state = init;
    let mut cache = FlipCache::with_label(params, x, &state, class)?;
    let mut units: Vec<(usize, usize)> = params
        .latent_sizes()
        .iter()
        .enumerate()
        .flat_map(|(l, &n)| (0..n).map(move |j| (l, j)))
        .collect();
    let mut order_rng = seeded(cfg.seed, stream_id(&[restart as u64, 0x0dde]));

    let mut value = cache.log_joint();
    let mut trace = vec![value];
    let mut sweeps = 0;
    let mut flips = 0;
    let mut converged = false;
    while sweeps < cfg.max_sweeps {
        if cfg.sweep_order == SweepOrder::Permuted {
            units.shuffle(&mut order_rng);
        }
        let mut flipped = 0;
        for &(l, j) in &units {
            // Ties keep the current value, so the objective never decreases.
            if cache.flip_gain(&state, l, j)? > 0.0 {
                cache.apply_flip(&mut state, l, j)?;
                flipped += 1;
            }
        }
        sweeps += 1;
        flips += flipped;
        let next = cache.log_joint();
        let improvement = next - value;
        value = next;
        trace.push(value);
        if flipped == 0 || (cfg.tol > 0.0 && improvement < cfg.tol) {
            converged = true;
            break;
        }
    }
    Ok(Run {
        state,
        value,
        sweeps,
        flips,
        converged,
        trace,
    })
}

/// Coordinate ascent with an optional label factor in the objective.
pub fn ca_map_labeled(
    x: &[f64],
    params: &ModelParams,
    init: &LatentState,
    class: Option<usize>,
    cfg: &CaConfig,
) -> Result<InferenceReport> {
    cfg.validate()?;
    params.check_state(init)?;
    let mut best: Option<Run> = None;
    for restart in 0..cfg.restarts {
        let start = if restart == 0 {
            init.clone()
        } else {
            let mut rng = seeded(cfg.seed, stream_id(&[restart as u64, 0x1417]));
            LatentState::random(params.latent_sizes(), &mut rng)
        };
        let run = run_from(params, x, class, start, cfg, restart)?;
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(InferenceReport {
        map_state: best.state,
        joint_log_prob: best.value,
        iterations_used: best.sweeps,
        flips: best.flips,
        converged: best.converged,
        trace: Some(best.trace),
    })
}

/// MAP configuration of `P(h | x)` by greedy single-unit updates from `init`.
pub fn ca_map(
    x: &[f64],
    params: &ModelParams,
    init: &LatentState,
    cfg: &CaConfig,
) -> Result<InferenceReport> {
    ca_map_labeled(x, params, init, None, cfg)
}

/// Coordinate ascent started from the inference network's thresholded output.
pub fn aug_ca_map(
    x: &[f64],
    params: &ModelParams,
    net: &InferenceNet,
    cfg: &CaConfig,
) -> Result<InferenceReport> {
    let init = net.map(x)?;
    ca_map(x, params, &init, cfg)
}

/// Checks that no single flip improves the objective at `state`.
pub fn is_local_maximum(x: &[f64], params: &ModelParams, state: &LatentState) -> Result<bool> {
    let mut cache = FlipCache::new(params, x, state)?;
    for (l, &n) in params.latent_sizes().iter().enumerate() {
        for j in 0..n {
            if cache.flip_gain(state, l, j)? > 0.0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::exact::exact_posterior;
    use crate::model::VisibleKind;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn independent_latents_follow_prior_sign() {
        let mut p = ModelParams::zeros(VisibleKind::Binary, &[3, 2]).unwrap();
        p.top_prior = array![-2.0, 2.0];
        for code in 0..4 {
            let init = LatentState::from_index(&[2], code);
            let r = ca_map(&[1.0, 0.0, 1.0], &p, &init, &CaConfig::default()).unwrap();
            assert_eq!(r.map_state.layers[0], vec![0, 1]);
            assert!(r.converged);
            assert!(r.iterations_used <= 2);
        }
    }

    #[test]
    fn trace_is_monotone_and_end_is_local_max() {
        let mut rng = seeded(3, 0);
        for sizes in [vec![6, 10], vec![5, 4, 3]] {
            for kind in [VisibleKind::Binary, VisibleKind::Gaussian] {
                let p = ModelParams::random(kind, &sizes, 2.0, &mut rng).unwrap();
                let (batch, _) = p.ancestral_sample(rng.random(), 10).unwrap();
                for m in 0..batch.len() {
                    let init = LatentState::random(p.latent_sizes(), &mut rng);
                    let cfg = CaConfig {
                        sweep_order: SweepOrder::Permuted,
                        seed: m as u64,
                        ..CaConfig::default()
                    };
                    let r = ca_map(batch.row(m), &p, &init, &cfg).unwrap();
                    let trace = r.trace.unwrap();
                    assert!(trace.windows(2).all(|w| w[1] >= w[0]));
                    assert!(is_local_maximum(batch.row(m), &p, &r.map_state).unwrap());
                    let direct = p.joint_log_prob(batch.row(m), &r.map_state).unwrap();
                    assert!((direct - r.joint_log_prob).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn restarts_find_the_exhaustive_map_mostly() {
        let mut rng = seeded(8, 0);
        let mut hits = 0;
        let trials = 100;
        for t in 0..trials {
            let p = ModelParams::random(VisibleKind::Binary, &[6, 10], 2.0, &mut rng).unwrap();
            let (batch, _) = p.ancestral_sample(t, 1).unwrap();
            let x = batch.row(0);
            let cfg = CaConfig {
                restarts: 20,
                seed: t,
                ..CaConfig::default()
            };
            let init = LatentState::random(p.latent_sizes(), &mut rng);
            let r = ca_map(x, &p, &init, &cfg).unwrap();
            let table = exact_posterior(x, &p).unwrap();
            if r.map_state == table.map_state() {
                hits += 1;
            }
        }
        assert!(hits >= 90, "{hits}/{trials}");
    }

    #[test]
    fn config_validation() {
        let p = ModelParams::zeros(VisibleKind::Binary, &[2, 2]).unwrap();
        let init = LatentState::zeros(&[2]);
        let bad = CaConfig {
            max_sweeps: 0,
            ..CaConfig::default()
        };
        assert!(matches!(ca_map(&[0.0, 1.0], &p, &init, &bad), Err(Error::Config(_))));
        let bad = CaConfig {
            restarts: 0,
            ..CaConfig::default()
        };
        assert!(matches!(ca_map(&[0.0, 1.0], &p, &init, &bad), Err(Error::Config(_))));
        let wrong = LatentState::zeros(&[3]);
        assert!(matches!(
            ca_map(&[0.0, 1.0], &p, &wrong, &CaConfig::default()),
            Err(Error::Shape(_))
        ));
    }
}
