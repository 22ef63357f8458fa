//! Contrastive counterfactual explanations for black-box classifiers.
//!
//! A shift predictor is trained in the latent space of a generative model so
//! that requested attribute changes can be realized on any latent code. The
//! resulting counterfactual images are scored by the classifier under
//! explanation, and necessity / sufficiency probabilities are estimated per
//! attribute, per direction and per subgroup.
//!
//! Everything runs against a synthetic, fully differentiable [`world`] whose
//! ground-truth attributes are latent half-spaces, so every estimate can be
//! checked against an exact counterfactual oracle.
//!
//! Module layout:
//!
//! - [`numkit`]: dense networks, reverse-mode gradients, optimizers, losses.
//! - [`world`]: latent prior, frozen decoder, attribute planes, oracle shifts.
//! - [`classifiers`]: attribute classifier and the black-box target classifier.
//! - [`shifter`]: the shift predictor and its training loop.
//! - [`causal`]: counterfactual engine, NEC/SUF estimation, contexts.
//! - [`cli`]: command implementations behind the `cflens` binary.

pub mod causal;
pub mod classifiers;
pub mod cli;
mod error;
pub mod numkit;
mod persist;
pub mod rng;
pub mod shifter;
pub mod stats;
pub mod world;

pub use error::{Error, Result};
