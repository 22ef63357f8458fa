use serde::{Deserialize, Serialize};

use super::net::{DenseNet, GradientBundle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            ..Self::adam(lr)
        }
    }
}

/// Optimizer moments for one network, flattened in parameter order.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: OptimizerConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, net: &DenseNet) -> Self {
        let moments = match config.kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => net.param_count(),
        };
        Self {
            config,
            first: vec![0.0; moments],
            second: vec![0.0; moments],
            step: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Non-finite gradients leave `net` and the state untouched.
    pub fn step(&mut self, net: &mut DenseNet, grads: &GradientBundle) -> Result<()> {
        if grads.layers.len() != net.layers().len()
            || grads
                .layers
                .iter()
                .zip(net.layers())
                .any(|(g, l)| g.w.len() != l.w.len() || g.b.len() != l.b.len())
        {
            return Err(Error::invalid("gradient shapes do not match the network"));
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFiniteGradient { layer });
        }
        if self.config.kind == OptimizerKind::Adam && self.first.len() != net.param_count() {
            return Err(Error::invalid("optimizer state belongs to another network"));
        }

        self.step += 1;
        let lr = self.config.lr;
        let params = net
            .layers_mut()
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()));
        let g = grads.layers.iter().flat_map(|l| l.w.iter().chain(&l.b));

        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.zip(g) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let OptimizerConfig {
                    beta1, beta2, eps, ..
                } = self.config;
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .zip(g)
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
