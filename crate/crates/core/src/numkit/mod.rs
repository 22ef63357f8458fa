//! Dense networks with exact reverse-mode gradients.
//!
//! Networks are fixed chains of affine layers with element-wise activations.
//! A forward pass records a [`Tape`]; the backward pass consumes it and
//! returns parameter gradients together with the gradient w.r.t. the input,
//! which is what lets a loss be chained through several frozen networks.

mod gradcheck;
mod loss;
mod net;
mod optim;

pub use gradcheck::{finite_diff_check, Differentiable, Evaluated, Reduction};
pub use loss::{bce_loss, clamp_probability, PROB_CLAMP};
pub use net::{
    Activation, DenseNet, GradientBundle, Layer, LayerGrad, OutputWithPre, Tape, NET_FORMAT,
};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
