use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::condition::ConditionVector;
use super::losses::shift_losses;
use super::predictor::ShiftPredictor;
use crate::classifiers::{AttributeClassifier, MIN_MEAN_ACCURACY};
use crate::error::{Error, Result};
use crate::numkit::{OptimizerConfig, OptimizerState};
use crate::persist;
use crate::rng::{self, Domain};
use crate::world::{LatentVector, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftTrainConfig {
    /// Faithfulness ratio weighting `L_f` against `L_a`.
    pub gamma: f64,
    pub batch_size: usize,
    pub iterations: usize,
    /// Probability that an attribute is left unset in a training sample.
    pub p_unset: f64,
    pub optimizer: OptimizerConfig,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for ShiftTrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            batch_size: 64,
            iterations: 3000,
            p_unset: 0.5,
            optimizer: OptimizerConfig::default(),
            hidden: vec![128, 128],
            seed: 0,
        }
    }
}

impl ShiftTrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::invalid("gamma must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.p_unset) {
            return Err(Error::invalid("p_unset must lie in [0, 1]"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iter: usize,
    pub loss_a: f64,
    pub loss_f: f64,
    pub loss_total: f64,
}

#[derive(Debug, Clone)]
pub struct ShiftTraining {
    pub predictor: ShiftPredictor,
    pub history: Vec<LossRecord>,
}

/// Latents from the prior plus random codes for iteration `iteration`.
pub(crate) fn draw_batch(
    cfg: &ShiftTrainConfig,
    d: usize,
    m: usize,
    iteration: usize,
) -> (Vec<LatentVector>, Vec<ConditionVector>) {
    let mut rng = rng::stream(Domain::Training, cfg.seed, iteration as u64);
    (0..cfg.batch_size)
        .map(|_| {
            let z = LatentVector((0..d).map(|_| rng.sample(StandardNormal)).collect());
            let codes = (0..m)
                .map(|_| {
                    if rng.random::<f64>() < cfg.p_unset {
                        0
                    } else if rng.random::<bool>() {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            (
                z,
                ConditionVector::new(codes).expect("codes drawn from {-1, 0, 1}"),
            )
        })
        .unzip()
}

/// Trains a fresh predictor against a frozen world and attribute classifier.
pub fn train_shift_predictor(
    cfg: &ShiftTrainConfig,
    world: &World,
    classifier: &AttributeClassifier,
) -> Result<ShiftTraining> {
    cfg.validate()?;
    if classifier.accuracy().iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid(
            "attribute classifier has no recorded held-out accuracy",
        ));
    }
    if classifier.mean_accuracy() < MIN_MEAN_ACCURACY {
        return Err(Error::invalid(format!(
            "attribute classifier mean accuracy {:.3} is below {MIN_MEAN_ACCURACY}",
            classifier.mean_accuracy()
        )));
    }
    let mut predictor = ShiftPredictor::new(world.d(), world.m(), &cfg.hidden, cfg.seed)?;
    predictor.set_gamma(cfg.gamma);
    let mut opt = OptimizerState::new(cfg.optimizer, predictor.net());
    let mut history = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let (latents, conds) = draw_batch(cfg, world.d(), world.m(), iter);
        let losses = shift_losses(&predictor, &latents, &conds, world, classifier, cfg.gamma)?;
        if !losses.total.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: iter });
        }
        if losses.fully_masked {
            log::warn!("iteration {iter}: every condition code unset, training on L_f only");
        }
        opt.step(predictor.net_mut(), &losses.grads)
            .map_err(|e| match e {
                Error::NonFiniteGradient { .. } => Error::NonFiniteLoss { iteration: iter },
                other => other,
            })?;
        if iter % 500 == 0 {
            log::debug!(
                "shift iteration {iter}: L_a {:.4}, L_f {:.4}",
                losses.loss_a,
                losses.loss_f
            );
        }
        history.push(LossRecord {
            iter,
            loss_a: losses.loss_a,
            loss_f: losses.loss_f,
            loss_total: losses.total,
        });
    }
    Ok(ShiftTraining { predictor, history })
}

pub fn loss_csv(history: &[LossRecord]) -> String {
    let mut out = String::from("iter,loss_a,loss_f,loss_total\n");
    for r in history {
        let _ = writeln!(out, "{},{},{},{}", r.iter, r.loss_a, r.loss_f, r.loss_total);
    }
    out
}

/// Writes `iter,loss_a,loss_f,loss_total` rows.
pub fn write_loss_csv(path: &Path, history: &[LossRecord]) -> Result<()> {
    persist::write_text(path, &loss_csv(history))
}
