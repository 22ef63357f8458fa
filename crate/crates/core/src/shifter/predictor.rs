use std::path::Path;

use serde::{Deserialize, Serialize};

use super::condition::ConditionVector;
use crate::error::{check_dim, Error, Result};
use crate::numkit::{Activation, DenseNet};
use crate::persist;
use crate::world::{LatentVector, World};

pub const SHIFTER_FORMAT: &str = "cflens-shifter-v1";

/// Anything that proposes a counterfactual latent for a set of condition codes.
pub trait LatentShift: Sync {
    fn shift(&self, z: &LatentVector, cond: &ConditionVector) -> Result<LatentVector>;
}

/// Residual shift predictor `z_hat = z + net(concat(z, codes))`.
///
/// The output layer starts at zero, so a fresh predictor is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShifterFile", into = "ShifterFile")]
pub struct ShiftPredictor {
    d: usize,
    m: usize,
    gamma: f64,
    net: DenseNet,
}

#[derive(Serialize, Deserialize)]
struct ShifterFile {
    format: String,
    d: usize,
    m: usize,
    gamma: f64,
    net: DenseNet,
}

impl From<ShiftPredictor> for ShifterFile {
    fn from(s: ShiftPredictor) -> Self {
        ShifterFile {
            format: SHIFTER_FORMAT.to_owned(),
            d: s.d,
            m: s.m,
            gamma: s.gamma,
            net: s.net,
        }
    }
}

impl TryFrom<ShifterFile> for ShiftPredictor {
    type Error = Error;

    fn try_from(f: ShifterFile) -> Result<Self> {
        if f.format != SHIFTER_FORMAT {
            return Err(Error::Format {
                expected: SHIFTER_FORMAT,
                found: f.format,
            });
        }
        ShiftPredictor::from_net(f.d, f.m, f.gamma, f.net)
    }
}

impl ShiftPredictor {
    /// `(d + m) -> hidden... -> d`, tanh hidden layers, zeroed linear head.
    pub fn new(d: usize, m: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut dims = vec![d + m];
        dims.extend_from_slice(hidden);
        dims.push(d);
        let mut acts = vec![Activation::Tanh; hidden.len()];
        acts.push(Activation::Linear);
        let mut net = DenseNet::new(seed, &dims, &acts)?;
        net.zero_output_layer();
        Self::from_net(d, m, 0.0, net)
    }

    pub fn from_net(d: usize, m: usize, gamma: f64, net: DenseNet) -> Result<Self> {
        check_dim("shift predictor input", d + m, net.in_dim())?;
        check_dim("shift predictor output", d, net.out_dim())?;
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::invalid("gamma must be finite and non-negative"));
        }
        Ok(Self { d, m, gamma, net })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Faithfulness ratio the predictor was trained with.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub(crate) fn set_gamma(&mut self, gamma: f64) {
        self.gamma = gamma;
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub(crate) fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub(crate) fn input(&self, z: &LatentVector, cond: &ConditionVector) -> Result<Vec<f64>> {
        check_dim("shift predictor latent", self.d, z.len())?;
        check_dim("shift predictor condition", self.m, cond.len())?;
        let mut x = Vec::with_capacity(self.d + self.m);
        x.extend_from_slice(z);
        x.extend(cond.as_input());
        Ok(x)
    }

    pub fn predict_shift(&self, z: &LatentVector, cond: &ConditionVector) -> Result<LatentVector> {
        let delta = self.net.eval(&self.input(z, cond)?)?;
        Ok(LatentVector(
            z.iter().zip(delta).map(|(z, dz)| z + dz).collect(),
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        persist::read_json(path)
    }
}

impl LatentShift for ShiftPredictor {
    fn shift(&self, z: &LatentVector, cond: &ConditionVector) -> Result<LatentVector> {
        self.predict_shift(z, cond)
    }
}

/// Exact counterfactuals from the world's attribute planes. Nonzero codes are
/// applied one after another; with orthonormal planes the order is irrelevant.
#[derive(Debug, Clone, Copy)]
pub struct OracleShift<'a>(pub &'a World);

impl LatentShift for OracleShift<'_> {
    fn shift(&self, z: &LatentVector, cond: &ConditionVector) -> Result<LatentVector> {
        check_dim("oracle condition", self.0.m(), cond.len())?;
        let mut out = z.clone();
        for (i, &code) in cond.codes().iter().enumerate() {
            if code != 0 {
                out = self.0.oracle_counterfactual(&out, i, code > 0)?;
            }
        }
        Ok(out)
    }
}
