use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numkit::{
    bce_loss, Activation, DenseNet, GradientBundle, OptimizerConfig, OptimizerState,
};
use crate::persist;
use crate::rng::{self, Domain};
use crate::world::{ImageVector, World};

/// Below this mean held-out accuracy the classifier is not trusted as supervision.
pub const MIN_MEAN_ACCURACY: f64 = 0.85;

/// Multi-task attribute classifier `n -> hidden -> m` with a sigmoid per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeClassifier {
    #[serde(flatten)]
    net: DenseNet,
    epochs: usize,
    accuracy: Vec<f64>,
}

impl AttributeClassifier {
    pub fn from_net(net: DenseNet) -> Result<Self> {
        if net.layers().last().map(|l| l.act) != Some(Activation::Sigmoid) {
            return Err(Error::invalid(
                "attribute classifier must end in a sigmoid layer",
            ));
        }
        let m = net.out_dim();
        Ok(Self {
            net,
            epochs: 0,
            accuracy: vec![f64::NAN; m],
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn n(&self) -> usize {
        self.net.in_dim()
    }

    pub fn m(&self) -> usize {
        self.net.out_dim()
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    /// Held-out accuracy per attribute recorded at the end of training.
    pub fn accuracy(&self) -> &[f64] {
        &self.accuracy
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.accuracy.iter().sum::<f64>() / self.accuracy.len() as f64
    }

    pub fn predict(&self, img: &ImageVector) -> Result<Vec<f64>> {
        check_dim("attribute classifier input", self.n(), img.len())?;
        self.net.eval(img)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = persist::read_json(path)?;
        if c.accuracy.len() != c.m() {
            return Err(Error::invalid(
                "accuracy table length differs from attribute count",
            ));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeTrainConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for AttributeTrainConfig {
    fn default() -> Self {
        Self {
            n_train: 4096,
            n_val: 1024,
            epochs: 30,
            batch_size: 64,
            hidden: 64,
            optimizer: OptimizerConfig::adam(3e-3),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttributeTraining {
    pub classifier: AttributeClassifier,
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
}

impl AttributeTraining {
    /// Fits a classifier on `(decode(z), true attributes of z)` pairs without
    /// judging the result.
    pub fn fit(world: &World, cfg: &AttributeTrainConfig) -> Result<Self> {
        if cfg.n_train < 256 {
            return Err(Error::invalid("n_train must be at least 256"));
        }
        if cfg.n_val == 0 || cfg.batch_size == 0 || cfg.hidden == 0 {
            return Err(Error::invalid(
                "n_val, batch_size and hidden must be positive",
            ));
        }
        let m = world.m();
        let mut net = DenseNet::new(
            cfg.seed,
            &[world.n(), cfg.hidden, m],
            &[Activation::Tanh, Activation::Sigmoid],
        )?;

        let labelled = |range: std::ops::Range<usize>| -> Result<Vec<(ImageVector, Vec<f64>)>> {
            range
                .into_par_iter()
                .map(|i| {
                    let z = world.sample_latent(cfg.seed, i as u64);
                    let labels = world
                        .true_attributes(&z)?
                        .into_iter()
                        .map(|b| if b { 1.0 } else { 0.0 })
                        .collect();
                    Ok((world.decode(&z)?, labels))
                })
                .collect()
        };
        let train = labelled(0..cfg.n_train)?;
        let val = labelled(cfg.n_train..cfg.n_train + cfg.n_val)?;

        let mut opt = OptimizerState::new(cfg.optimizer, &net);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mask = vec![1.0; m];
        let mut epoch_loss = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng::stream(Domain::Split, cfg.seed, epoch as u64));
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let per_sample: Vec<(f64, GradientBundle)> = batch
                    .par_iter()
                    .map(|&i| {
                        let (img, labels) = &train[i];
                        let (p, tape) = net.forward(img)?;
                        let (loss, grad_p) = bce_loss(&p, labels, &mask)?;
                        Ok((loss, net.backward(&tape, &grad_p)?))
                    })
                    .collect::<Result<_>>()?;
                let mut grads = GradientBundle::zeros_like(&net);
                for (loss, g) in &per_sample {
                    total += loss;
                    grads.accumulate(g);
                }
                grads.scale(1.0 / batch.len() as f64);
                opt.step(&mut net, &grads)?;
            }
            let mean = total / train.len() as f64;
            log::debug!("attribute classifier epoch {epoch}: loss {mean:.5}");
            epoch_loss.push(mean);
        }

        let accuracy = held_out_accuracy(&net, &val)?;
        Ok(Self {
            classifier: AttributeClassifier {
                net,
                epochs: cfg.epochs,
                accuracy,
            },
            epoch_loss,
        })
    }
}

fn held_out_accuracy(net: &DenseNet, val: &[(ImageVector, Vec<f64>)]) -> Result<Vec<f64>> {
    let m = net.out_dim();
    let hits: Vec<Vec<bool>> = val
        .par_iter()
        .map(|(img, labels)| {
            let p = net.eval(img)?;
            Ok(p.iter()
                .zip(labels)
                .map(|(&p, &t)| (p > 0.5) == (t > 0.5))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..m)
        .map(|i| hits.iter().filter(|h| h[i]).count() as f64 / val.len() as f64)
        .collect())
}

/// Trains and rejects classifiers whose mean held-out accuracy is below
/// [`MIN_MEAN_ACCURACY`]; the error carries the accuracy table.
pub fn train_attribute_classifier(
    world: &World,
    cfg: &AttributeTrainConfig,
) -> Result<AttributeTraining> {
    let training = AttributeTraining::fit(world, cfg)?;
    let mean = training.classifier.mean_accuracy();
    if mean >= MIN_MEAN_ACCURACY {
        Ok(training)
    } else {
        Err(Error::TrainingFailed {
            accuracy: training.classifier.accuracy.clone(),
            mean,
        })
    }
}
