//! Counterfactual engine and necessity / sufficiency estimation.
//!
//! A counterfactual is produced in three steps: the shift predictor stands in
//! for the posterior over latents given the requested attribute values
//! (abduction), the requested codes are applied (action), and the shifted
//! latent is decoded and passed to the target classifier (prediction).
//!
//! Over a population, for attribute `i` and direction `+`/`-`:
//!
//! - NEC: among factual positives, the fraction whose counterfactual is negative;
//! - SUF: among factual negatives, the fraction whose counterfactual is positive.
//!
//! A [`Context`] restricts both to the members whose factual attribute
//! predictions match it.

mod alignment;
mod engine;
mod intervention;
mod scores;

pub use alignment::{baseline_csv, Alignment, BaselineRow};
pub use engine::{
    AttributeReadout, CounterfactualRecord, Engine, Evaluation, GroundTruthReadout, Population,
};
pub use intervention::{Context, Intervention};
pub use scores::{wilson_interval, Score, ScoreEntry, ScoreKind, ScoreReport, WILSON_Z};
