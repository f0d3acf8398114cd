use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{CaConfig, NetTrainConfig};
use crate::model::VisibleKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MStep {
    ClosedFormGaussian,
    SgdBinary,
}

impl MStep {
    pub fn visible_kind(self) -> VisibleKind {
        match self {
            MStep::ClosedFormGaussian => VisibleKind::Gaussian,
            MStep::SgdBinary => VisibleKind::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EStep {
    Ca,
    AugCa,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub m_step: MStep,
    pub e_step: EStep,
    pub ca_cfg: CaConfig,
    pub weight_init_scale: f64,
    /// SGD passes over the assignments per M-step.
    pub m_step_epochs: usize,
    /// Inference network refresh settings; `net.epochs` passes run per
    /// training epoch once the warm-up is over.
    pub net: NetTrainConfig,
    /// Epochs of plain coordinate ascent before the inference network is
    /// used to initialize it.
    pub aug_warmup_epochs: usize,
    /// Stop once the objective improves by less than this (nats per
    /// sample) for `patience` consecutive epochs. Zero disables the rule.
    pub convergence_tol: f64,
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            lr: 0.1,
            batch_size: 100,
            seed: 0,
            m_step: MStep::SgdBinary,
            e_step: EStep::AugCa,
            ca_cfg: CaConfig::default(),
            weight_init_scale: 0.01,
            m_step_epochs: 1,
            net: NetTrainConfig {
                epochs: 1,
                lr: 0.05,
                ..NetTrainConfig::default()
            },
            aug_warmup_epochs: 2,
            convergence_tol: 1e-4,
            patience: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.weight_init_scale > 0.0) {
            return Err(Error::Config("weight_init_scale must be positive".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::Config("convergence_tol must be non-negative".into()));
        }
        self.ca_cfg.validate()?;
        self.net.validate()
    }

    pub fn validate_for(&self, kind: VisibleKind) -> Result<()> {
        self.validate()?;
        if self.m_step.visible_kind() != kind {
            return Err(Error::Config(format!(
                "m_step {:?} cannot train a {kind} visible layer",
                self.m_step
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample objective after the epoch's parameter update.
    pub objective: f64,
    pub seconds: f64,
    pub param_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnTrace {
    pub epochs: Vec<EpochRecord>,
    pub converged: bool,
}

impl LearnTrace {
    pub fn push(&mut self, epoch: usize, objective: f64, elapsed: Duration, param_norm: f64) {
        self.epochs.push(EpochRecord {
            epoch,
            objective,
            seconds: elapsed.as_secs_f64(),
            param_norm,
        });
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.epochs.iter().map(|r| r.objective).collect()
    }

    pub fn first(&self) -> Option<f64> {
        self.epochs.first().map(|r| r.objective)
    }

    pub fn last(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.objective)
    }

    pub fn append(&mut self, other: LearnTrace) {
        let offset = self.epochs.len();
        self.epochs.extend(other.epochs.into_iter().map(|mut r| {
            r.epoch += offset;
            r
        }));
        self.converged = other.converged;
    }
}

/// Tracks the "small improvement for `patience` epochs" stopping rule.
#[derive(Clone, Debug)]
pub(crate) struct Stopper {
    tol: f64,
    patience: usize,
    previous: Option<f64>,
    streak: usize,
}

impl Stopper {
    pub fn new(cfg: &TrainConfig) -> Self {
        Stopper {
            tol: cfg.convergence_tol,
            patience: cfg.patience,
            previous: None,
            streak: 0,
        }
    }

    /// Records an epoch objective; true once training should stop.
    pub fn observe(&mut self, objective: f64) -> bool {
        if let Some(prev) = self.previous {
            if objective - prev < self.tol {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
        }
        self.previous = Some(objective);
        self.tol > 0.0 && self.patience > 0 && self.streak >= self.patience
    }
}
