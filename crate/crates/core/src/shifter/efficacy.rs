use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::condition::{ConditionVector, Direction};
use super::predictor::LatentShift;
use crate::classifiers::AttributeClassifier;
use crate::error::{Error, Result};
use crate::world::World;

/// How well single-attribute requests are realized on a probe set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficacyReport {
    pub samples: usize,
    /// `flip_rate[i][0]` for increase requests, `[i][1]` for decrease: the
    /// fraction whose classifier prediction lands on the requested side.
    pub flip_rate: Vec<[f64; 2]>,
    /// Mean `|z_hat - z|` over all requests.
    pub mean_displacement: f64,
    /// Mean displacement of the exact oracle for the same requests.
    pub oracle_displacement: f64,
}

impl EfficacyReport {
    pub fn min_flip_rate(&self) -> f64 {
        self.flip_rate
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Requests every `(attribute, direction)` on `count` latents drawn with `seed`.
pub fn evaluate_efficacy(
    shift: &dyn LatentShift,
    world: &World,
    classifier: &AttributeClassifier,
    seed: u64,
    count: usize,
) -> Result<EfficacyReport> {
    if count == 0 {
        return Err(Error::invalid("efficacy probe needs at least one latent"));
    }
    let m = world.m();
    let latents = world.sample_latents(seed, count)?;
    // (hits per attribute/direction, displacement, oracle displacement)
    let per_sample: Vec<(Vec<[bool; 2]>, f64, f64)> = latents
        .par_iter()
        .map(|z| {
            let mut hits = vec![[false; 2]; m];
            let (mut moved, mut oracle) = (0.0, 0.0);
            for (i, hit) in hits.iter_mut().enumerate() {
                for (k, dir) in Direction::BOTH.into_iter().enumerate() {
                    let cond = ConditionVector::single(m, i, dir)?;
                    let z_hat = shift.shift(z, &cond)?;
                    let p = classifier.predict(&world.decode(&z_hat)?)?[i];
                    hit[k] = (p > 0.5) == dir.target();
                    moved += distance(&z_hat, z);
                    oracle += distance(&world.oracle_counterfactual(z, i, dir.target())?, z);
                }
            }
            Ok((hits, moved, oracle))
        })
        .collect::<Result<_>>()?;

    let requests = (count * m * 2) as f64;
    let flip_rate = (0..m)
        .map(|i| {
            let rate =
                |k: usize| per_sample.iter().filter(|s| s.0[i][k]).count() as f64 / count as f64;
            [rate(0), rate(1)]
        })
        .collect();
    Ok(EfficacyReport {
        samples: count,
        flip_rate,
        mean_displacement: per_sample.iter().map(|s| s.1).sum::<f64>() / requests,
        oracle_displacement: per_sample.iter().map(|s| s.2).sum::<f64>() / requests,
    })
}
