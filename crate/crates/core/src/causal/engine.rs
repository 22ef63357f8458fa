use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::intervention::{Context, Intervention};
use super::scores::{Score, ScoreEntry, ScoreKind, ScoreReport};
use crate::classifiers::{AttributeClassifier, TargetClassifier, TargetInput, TargetOutput};
use crate::error::{check_dim, Error, Result};
use crate::shifter::{ConditionVector, Direction, LatentShift};
use crate::world::{ImageVector, LatentVector, World};

/// Source of attribute probabilities for a (latent, image) pair.
pub trait AttributeReadout: Sync {
    fn attribute_count(&self) -> usize;

    fn read(&self, z: &LatentVector, image: &ImageVector) -> Result<Vec<f64>>;
}

impl AttributeReadout for AttributeClassifier {
    fn attribute_count(&self) -> usize {
        self.m()
    }

    fn read(&self, _z: &LatentVector, image: &ImageVector) -> Result<Vec<f64>> {
        self.predict(image)
    }
}

/// Reads the world's ground truth off the latent as hard 0/1 values.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruthReadout<'a>(pub &'a World);

impl AttributeReadout for GroundTruthReadout<'_> {
    fn attribute_count(&self) -> usize {
        self.0.m()
    }

    fn read(&self, z: &LatentVector, _image: &ImageVector) -> Result<Vec<f64>> {
        Ok(self
            .0
            .true_attributes(z)?
            .into_iter()
            .map(|b| if b { 1.0 } else { 0.0 })
            .collect())
    }
}

/// A factual/counterfactual pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    pub intervention: Intervention,
    pub z: LatentVector,
    pub z_hat: LatentVector,
    pub image: ImageVector,
    pub cf_image: ImageVector,
    pub target_before: TargetOutput,
    pub target_after: TargetOutput,
    pub attrs_before: Vec<f64>,
    pub attrs_after: Vec<f64>,
}

/// Latents under explanation, tagged with the seed that drew them.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub seed: u64,
    pub latents: Vec<LatentVector>,
}

impl Population {
    pub fn sample(world: &World, seed: u64, size: usize) -> Result<Self> {
        Ok(Self {
            seed,
            latents: world.sample_latents(seed, size)?,
        })
    }

    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }
}

struct Observed {
    image: ImageVector,
    attrs: Vec<f64>,
    target: TargetOutput,
}

struct Factual {
    attr_classes: Vec<bool>,
    class: bool,
}

/// Runs counterfactual queries against immutable models.
#[derive(Clone, Copy)]
pub struct Engine<'a> {
    world: &'a World,
    shift: &'a dyn LatentShift,
    readout: &'a dyn AttributeReadout,
    target: &'a TargetClassifier,
    condition_on_factual_attribute: bool,
}

fn classes(attrs: &[f64]) -> Vec<bool> {
    attrs.iter().map(|&p| p > 0.5).collect()
}

impl<'a> Engine<'a> {
    pub fn new(
        world: &'a World,
        shift: &'a dyn LatentShift,
        readout: &'a dyn AttributeReadout,
        target: &'a TargetClassifier,
    ) -> Result<Self> {
        check_dim(
            "attribute readout vs world",
            world.m(),
            readout.attribute_count(),
        )?;
        let expected = if target.consumes_image() {
            world.n()
        } else {
            world.m()
        };
        check_dim("target classifier input", expected, target.input_dim())?;
        Ok(Self {
            world,
            shift,
            readout,
            target,
            condition_on_factual_attribute: false,
        })
    }

    /// Also require the factual attribute class opposite to the intervention
    /// (0 for `+`, 1 for `-`) in NEC/SUF denominators.
    pub fn condition_on_factual_attribute(mut self, on: bool) -> Self {
        self.condition_on_factual_attribute = on;
        self
    }

    pub fn world(&self) -> &World {
        self.world
    }

    fn observe(&self, z: &LatentVector) -> Result<Observed> {
        let image = self.world.decode(z)?;
        let attrs = self.readout.read(z, &image)?;
        let input = if self.target.consumes_image() {
            TargetInput::Image(&image)
        } else {
            TargetInput::Attributes(&attrs)
        };
        let target = self.target.predict(input)?;
        Ok(Observed {
            image,
            attrs,
            target,
        })
    }

    fn factual(&self, z: &LatentVector) -> Result<Factual> {
        let o = self.observe(z)?;
        Ok(Factual {
            attr_classes: classes(&o.attrs),
            class: o.target.class,
        })
    }

    fn counterfactual_class(&self, z: &LatentVector, codes: &ConditionVector) -> Result<bool> {
        Ok(self.observe(&self.shift.shift(z, codes)?)?.target.class)
    }

    /// Abduction through the shift predictor, action on the codes, prediction
    /// through the decoder and the target classifier.
    pub fn counterfactual(
        &self,
        z: &LatentVector,
        iv: &Intervention,
    ) -> Result<CounterfactualRecord> {
        let before = self.observe(z)?;
        let z_hat = self.shift.shift(z, iv.codes())?;
        let after = self.observe(&z_hat)?;
        Ok(CounterfactualRecord {
            intervention: iv.clone(),
            z: z.clone(),
            z_hat,
            image: before.image,
            cf_image: after.image,
            target_before: before.target,
            target_after: after.target,
            attrs_before: before.attrs,
            attrs_after: after.attrs,
        })
    }

    fn check_population(&self, population: &Population, context: &Context) -> Result<()> {
        if population.is_empty() {
            return Err(Error::invalid("population is empty"));
        }
        if let Some(i) = context.max_attribute() {
            if i >= self.world.m() {
                return Err(Error::invalid(format!(
                    "context mentions attr{i} but only {} attributes exist",
                    self.world.m()
                )));
            }
        }
        Ok(())
    }

    /// `P(Y_{A <- a} = outcome | context)` over the population.
    pub fn estimate_query(
        &self,
        population: &Population,
        iv: &Intervention,
        outcome: bool,
        context: &Context,
    ) -> Result<Score> {
        self.check_population(population, context)?;
        check_dim("intervention", self.world.m(), iv.codes().len())?;
        let hits: Vec<Option<bool>> = population
            .latents
            .par_iter()
            .map(|z| {
                let f = self.factual(z)?;
                if !context.matches(&f.attr_classes) {
                    return Ok(None);
                }
                Ok(Some(self.counterfactual_class(z, iv.codes())? == outcome))
            })
            .collect::<Result<_>>()?;
        let n = hits.iter().flatten().count();
        let k = hits.iter().flatten().filter(|&&h| h).count();
        Ok(Score::from_counts(k, n))
    }

    fn directional(
        &self,
        population: &Population,
        attribute: usize,
        direction: Direction,
        context: &Context,
        kind: ScoreKind,
    ) -> Result<Score> {
        self.check_population(population, context)?;
        let codes = ConditionVector::single(self.world.m(), attribute, direction)?;
        let factual_class = kind == ScoreKind::Necessity;
        let hits: Vec<Option<bool>> = population
            .latents
            .par_iter()
            .map(|z| {
                let f = self.factual(z)?;
                let eligible = f.class == factual_class
                    && context.matches(&f.attr_classes)
                    && (!self.condition_on_factual_attribute
                        || f.attr_classes[attribute] != direction.target());
                if !eligible {
                    return Ok(None);
                }
                Ok(Some(self.counterfactual_class(z, &codes)? != factual_class))
            })
            .collect::<Result<_>>()?;
        let n = hits.iter().flatten().count();
        let k = hits.iter().flatten().filter(|&&h| h).count();
        Ok(Score::from_counts(k, n))
    }

    /// Among factual positives in the context, the fraction flipped to negative
    /// by moving attribute `attribute` in `direction`.
    pub fn necessity(
        &self,
        population: &Population,
        attribute: usize,
        direction: Direction,
        context: &Context,
    ) -> Result<Score> {
        self.directional(
            population,
            attribute,
            direction,
            context,
            ScoreKind::Necessity,
        )
    }

    /// Among factual negatives in the context, the fraction flipped to positive.
    pub fn sufficiency(
        &self,
        population: &Population,
        attribute: usize,
        direction: Direction,
        context: &Context,
    ) -> Result<Score> {
        self.directional(
            population,
            attribute,
            direction,
            context,
            ScoreKind::Sufficiency,
        )
    }

    /// Evaluates every member once: factual outcome plus the counterfactual
    /// outcome of each single-attribute request.
    pub fn evaluate(&self, population: &Population) -> Result<Evaluation> {
        self.check_population(population, &Context::empty())?;
        let m = self.world.m();
        let members: Vec<Member> = population
            .latents
            .par_iter()
            .map(|z| {
                let f = self.factual(z)?;
                let counterfactual = (0..m)
                    .map(|i| {
                        let mut out = [false; 2];
                        for (k, dir) in Direction::BOTH.into_iter().enumerate() {
                            let codes = ConditionVector::single(m, i, dir)?;
                            out[k] = self.counterfactual_class(z, &codes)?;
                        }
                        Ok(out)
                    })
                    .collect::<Result<_>>()?;
                Ok(Member {
                    attr_classes: f.attr_classes,
                    class: f.class,
                    counterfactual,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Evaluation {
            seed: population.seed,
            m,
            condition_on_factual_attribute: self.condition_on_factual_attribute,
            members,
        })
    }

    /// Report over the whole population.
    pub fn global_scores(&self, population: &Population) -> Result<ScoreReport> {
        self.contextual_scores(population, &Context::empty())
    }

    pub fn contextual_scores(
        &self,
        population: &Population,
        context: &Context,
    ) -> Result<ScoreReport> {
        self.check_population(population, context)?;
        self.evaluate(population)?.report(context)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Member {
    attr_classes: Vec<bool>,
    class: bool,
    /// `[increase, decrease]` counterfactual class per attribute.
    counterfactual: Vec<[bool; 2]>,
}

/// Cached factual and counterfactual outcomes of a population, from which
/// reports for any context are tallied without touching the models again.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    seed: u64,
    m: usize,
    condition_on_factual_attribute: bool,
    members: Vec<Member>,
}

impl Evaluation {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.members.iter().filter(|m| m.class).count()
    }

    pub fn score(
        &self,
        attribute: usize,
        direction: Direction,
        kind: ScoreKind,
        context: &Context,
    ) -> Result<Score> {
        if attribute >= self.m || context.max_attribute().is_some_and(|i| i >= self.m) {
            return Err(Error::invalid("attribute index out of range"));
        }
        let k_dir = usize::from(direction == Direction::Decrease);
        let factual_class = kind == ScoreKind::Necessity;
        let (mut k, mut n) = (0, 0);
        for member in &self.members {
            let eligible = member.class == factual_class
                && context.matches(&member.attr_classes)
                && (!self.condition_on_factual_attribute
                    || member.attr_classes[attribute] != direction.target());
            if eligible {
                n += 1;
                if member.counterfactual[attribute][k_dir] != factual_class {
                    k += 1;
                }
            }
        }
        Ok(Score::from_counts(k, n))
    }

    /// Rows ordered by attribute, then `+` before `-`, then NEC before SUF.
    pub fn report(&self, context: &Context) -> Result<ScoreReport> {
        let mut entries = Vec::with_capacity(self.m * 4);
        for attribute in 0..self.m {
            for direction in Direction::BOTH {
                for kind in [ScoreKind::Necessity, ScoreKind::Sufficiency] {
                    entries.push(ScoreEntry {
                        attribute,
                        direction,
                        kind,
                        score: self.score(attribute, direction, kind, context)?,
                    });
                }
            }
        }
        Ok(ScoreReport {
            population_seed: self.seed,
            population_size: self.members.len(),
            context: context.to_string(),
            condition_on_factual_attribute: self.condition_on_factual_attribute,
            entries,
        })
    }
}
