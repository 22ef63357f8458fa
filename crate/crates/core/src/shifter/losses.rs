use rayon::prelude::*;

use super::condition::ConditionVector;
use super::predictor::ShiftPredictor;
use crate::classifiers::AttributeClassifier;
use crate::error::{check_dim, Error, Result};
use crate::numkit::{bce_loss, DenseNet, Differentiable, Evaluated, GradientBundle};
use crate::world::{LatentVector, World};

/// Batch objective `L = L_a + gamma * L_f` and its gradient w.r.t. the
/// predictor's parameters.
#[derive(Debug, Clone)]
pub struct ShiftLosses {
    /// Masked BCE between requested codes and classifier output, batch mean.
    pub loss_a: f64,
    /// Mean Euclidean displacement `|z_hat - z|`.
    pub loss_f: f64,
    pub total: f64,
    pub grads: GradientBundle,
    /// True when every code of every sample was unset.
    pub fully_masked: bool,
}

struct SampleTerms {
    loss_a: f64,
    loss_f: f64,
    masked: bool,
    grads: GradientBundle,
}

fn check_models(
    predictor: &ShiftPredictor,
    world: &World,
    classifier: &AttributeClassifier,
) -> Result<()> {
    check_dim("shift predictor latent vs world", world.d(), predictor.d())?;
    check_dim(
        "shift predictor attributes vs classifier",
        classifier.m(),
        predictor.m(),
    )?;
    check_dim(
        "classifier input vs world pixels",
        world.n(),
        classifier.n(),
    )
}

/// One sample's terms; the parameter gradient is scaled by `scale`.
fn sample_terms(
    predictor: &ShiftPredictor,
    z: &LatentVector,
    cond: &ConditionVector,
    world: &World,
    classifier: &AttributeClassifier,
    gamma: f64,
    scale: f64,
) -> Result<SampleTerms> {
    let net = predictor.net();
    let (delta, shift_tape) = net.forward(&predictor.input(z, cond)?)?;
    let z_hat: Vec<f64> = z.iter().zip(&delta).map(|(z, dz)| z + dz).collect();
    let decoder = world.decoder();
    let (image, decode_tape) = decoder.forward(&z_hat)?;
    let (p, classify_tape) = classifier.net().forward(&image)?;

    let (targets, mask) = cond.targets_and_mask();
    let masked = cond.is_unset();
    let (loss_a, grad_p) = bce_loss(&p, &targets, &mask)?;
    let mut grad_delta = if masked {
        vec![0.0; z.len()]
    } else {
        let grad_image = classifier.net().input_gradient(&classify_tape, &grad_p)?;
        decoder.input_gradient(&decode_tape, &grad_image)?
    };

    let loss_f = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if loss_f > 0.0 {
        grad_delta
            .iter_mut()
            .zip(&delta)
            .for_each(|(g, dz)| *g += gamma * dz / loss_f);
    }
    grad_delta.iter_mut().for_each(|g| *g *= scale);
    let grads = net.backward(&shift_tape, &grad_delta)?;
    Ok(SampleTerms {
        loss_a,
        loss_f,
        masked,
        grads,
    })
}

/// Evaluates the training objective on a batch.
///
/// Only the predictor receives gradients; the decoder and the classifier
/// are read-only here.
pub fn shift_losses(
    predictor: &ShiftPredictor,
    latents: &[LatentVector],
    conds: &[ConditionVector],
    world: &World,
    classifier: &AttributeClassifier,
    gamma: f64,
) -> Result<ShiftLosses> {
    if latents.is_empty() {
        return Err(Error::invalid("shift loss needs a non-empty batch"));
    }
    check_dim("condition batch", latents.len(), conds.len())?;
    check_models(predictor, world, classifier)?;
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::invalid("gamma must be finite and non-negative"));
    }
    let b = latents.len() as f64;
    let terms: Vec<SampleTerms> = latents
        .par_iter()
        .zip(conds.par_iter())
        .map(|(z, c)| sample_terms(predictor, z, c, world, classifier, gamma, 1.0 / b))
        .collect::<Result<_>>()?;

    // fixed index order keeps the reduction bit-reproducible
    let mut grads = GradientBundle::zeros_like(predictor.net());
    let (mut loss_a, mut loss_f) = (0.0, 0.0);
    let mut fully_masked = true;
    for t in &terms {
        loss_a += t.loss_a;
        loss_f += t.loss_f;
        fully_masked &= t.masked;
        grads.accumulate(&t.grads);
    }
    let (loss_a, loss_f) = (loss_a / b, loss_f / b);
    Ok(ShiftLosses {
        loss_a,
        loss_f,
        total: loss_a + gamma * loss_f,
        grads,
        fully_masked,
    })
}

/// `concat(z, codes) -> C(G(z + M(z, codes)))` as a differentiable function of
/// the predictor's parameters, for gradient checking the whole chain.
#[derive(Debug, Clone)]
pub struct ShiftChain<'a> {
    pub predictor: ShiftPredictor,
    pub world: &'a World,
    pub classifier: &'a AttributeClassifier,
}

impl<'a> ShiftChain<'a> {
    pub fn new(
        predictor: ShiftPredictor,
        world: &'a World,
        classifier: &'a AttributeClassifier,
    ) -> Result<Self> {
        check_models(&predictor, world, classifier)?;
        Ok(Self {
            predictor,
            world,
            classifier,
        })
    }

    fn split<'x>(&self, x: &'x [f64]) -> Result<(&'x [f64], &'x [f64])> {
        check_dim(
            "shift chain input",
            self.predictor.d() + self.predictor.m(),
            x.len(),
        )?;
        Ok(x.split_at(self.predictor.d()))
    }
}

impl Differentiable for ShiftChain<'_> {
    fn input_dim(&self) -> usize {
        self.predictor.d() + self.predictor.m()
    }

    fn params(&self) -> Vec<f64> {
        self.predictor.net().params()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.predictor.net_mut().set_params(params)
    }

    fn visit_param_perturbations(
        &self,
        x: &[f64],
        eps: f64,
        visit: &mut dyn FnMut(usize, Evaluated, Evaluated) -> Result<()>,
    ) -> Result<()> {
        let (z, _) = self.split(x)?;
        let through = |delta: Vec<f64>| -> Result<Evaluated> {
            let z_hat: Vec<f64> = z.iter().zip(delta).map(|(z, dz)| z + dz).collect();
            Differentiable::evaluate(self.classifier.net(), &self.world.decoder().eval(&z_hat)?)
        };
        self.predictor
            .net()
            .visit_param_perturbations(x, eps, &mut |k, (up, _), (down, _)| {
                visit(k, through(up)?, through(down)?)
            })
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluated> {
        let (z, _) = self.split(x)?;
        let delta = self.predictor.net().eval(x)?;
        let z_hat: Vec<f64> = z.iter().zip(delta).map(|(z, dz)| z + dz).collect();
        Differentiable::evaluate(self.classifier.net(), &self.world.decoder().eval(&z_hat)?)
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (z, _) = self.split(x)?;
        let delta = self.predictor.net().eval(x)?;
        let z_hat: Vec<f64> = z.iter().zip(delta).map(|(z, dz)| z + dz).collect();
        self.classifier
            .net()
            .eval(&self.world.decoder().eval(&z_hat)?)
    }

    fn gradients(&self, x: &[f64], grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (z, _) = self.split(x)?;
        let net: &DenseNet = self.predictor.net();
        let (delta, shift_tape) = net.forward(x)?;
        let z_hat: Vec<f64> = z.iter().zip(&delta).map(|(z, dz)| z + dz).collect();
        let (image, decode_tape) = self.world.decoder().forward(&z_hat)?;
        let (_, classify_tape) = self.classifier.net().forward(&image)?;
        let grad_image = self
            .classifier
            .net()
            .input_gradient(&classify_tape, grad_out)?;
        let grad_z_hat = self
            .world
            .decoder()
            .input_gradient(&decode_tape, &grad_image)?;
        let mut grads = net.backward(&shift_tape, &grad_z_hat)?;
        // residual path: z_hat depends on z directly as well as through M
        grads
            .input
            .iter_mut()
            .zip(&grad_z_hat)
            .for_each(|(g, r)| *g += r);
        Ok((grads.flat_params(), grads.input))
    }
}
