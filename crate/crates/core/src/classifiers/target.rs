use std::path::Path;

use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::numkit::{Activation, DenseNet};
use crate::persist;

pub const LOGISTIC_FORMAT: &str = "cflens-logistic-v1";

/// Decision threshold; a probability of exactly 0.5 is class 0.
pub const THRESHOLD: f64 = 0.5;

/// What the target classifier is fed.
#[derive(Debug, Clone, Copy)]
pub enum TargetInput<'a> {
    /// Attribute probabilities from the attribute classifier.
    Attributes(&'a [f64]),
    /// Raw pixels.
    Image(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetOutput {
    pub probability: f64,
    pub class: bool,
}

impl TargetOutput {
    pub fn from_probability(probability: f64) -> Self {
        Self {
            probability,
            class: probability > THRESHOLD,
        }
    }
}

/// The black-box binary classifier under explanation.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetClassifier {
    /// `sigmoid(beta . a + beta0)` over attribute probabilities `a`.
    Logistic { beta: Vec<f64>, beta0: f64 },
    /// Dense net over pixels ending in a single sigmoid unit.
    Net(DenseNet),
}

#[derive(Serialize, Deserialize)]
struct LogisticFile {
    format: String,
    beta: Vec<f64>,
    beta0: f64,
}

impl TargetClassifier {
    pub fn logistic(beta: Vec<f64>, beta0: f64) -> Result<Self> {
        if beta.is_empty() || beta.iter().chain([&beta0]).any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "logistic coefficients must be finite and non-empty",
            ));
        }
        Ok(TargetClassifier::Logistic { beta, beta0 })
    }

    pub fn net(net: DenseNet) -> Result<Self> {
        if net.out_dim() != 1 || net.layers().last().map(|l| l.act) != Some(Activation::Sigmoid) {
            return Err(Error::invalid(
                "target network must end in a single sigmoid unit",
            ));
        }
        Ok(TargetClassifier::Net(net))
    }

    /// Always class 1 (`beta = 0`, `beta0 = 1`).
    pub fn constant_positive(m: usize) -> Self {
        TargetClassifier::Logistic {
            beta: vec![0.0; m],
            beta0: 1.0,
        }
    }

    /// Always class 0 (`beta = 0`, `beta0 = -1`).
    pub fn constant_negative(m: usize) -> Self {
        TargetClassifier::Logistic {
            beta: vec![0.0; m],
            beta0: -1.0,
        }
    }

    pub fn consumes_image(&self) -> bool {
        matches!(self, TargetClassifier::Net(_))
    }

    /// Length of the input this classifier expects.
    pub fn input_dim(&self) -> usize {
        match self {
            TargetClassifier::Logistic { beta, .. } => beta.len(),
            TargetClassifier::Net(net) => net.in_dim(),
        }
    }

    pub fn predict(&self, input: TargetInput<'_>) -> Result<TargetOutput> {
        let p = match (self, input) {
            (TargetClassifier::Logistic { beta, beta0 }, TargetInput::Attributes(a)) => {
                check_dim("logistic input", beta.len(), a.len())?;
                let logit = beta.iter().zip(a).map(|(b, a)| b * a).sum::<f64>() + beta0;
                crate::numkit::Activation::Sigmoid.apply(logit)
            }
            (TargetClassifier::Net(net), TargetInput::Image(px)) => net.eval(px)?[0],
            _ => return Err(self.kind_mismatch()),
        };
        Ok(TargetOutput::from_probability(p))
    }

    /// Gradient of `grad_out * p` w.r.t. the input.
    pub fn input_backward(&self, input: TargetInput<'_>, grad_out: f64) -> Result<Vec<f64>> {
        match (self, input) {
            (TargetClassifier::Logistic { beta, .. }, TargetInput::Attributes(_)) => {
                let p = self.predict(input)?.probability;
                let s = p * (1.0 - p) * grad_out;
                Ok(beta.iter().map(|b| s * b).collect())
            }
            (TargetClassifier::Net(net), TargetInput::Image(px)) => {
                let (_, tape) = net.forward(px)?;
                net.input_gradient(&tape, &[grad_out])
            }
            _ => Err(self.kind_mismatch()),
        }
    }

    fn kind_mismatch(&self) -> Error {
        match self {
            TargetClassifier::Logistic { .. } => {
                Error::invalid("logistic target consumes attribute probabilities, not pixels")
            }
            TargetClassifier::Net(_) => {
                Error::invalid("network target consumes pixels, not attribute probabilities")
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        persist::read_json(path)
    }
}

impl Serialize for TargetClassifier {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TargetClassifier::Logistic { beta, beta0 } => LogisticFile {
                format: LOGISTIC_FORMAT.to_owned(),
                beta: beta.clone(),
                beta0: *beta0,
            }
            .serialize(s),
            TargetClassifier::Net(net) => net.serialize(s).map_err(S::Error::custom),
        }
    }
}

impl<'de> Deserialize<'de> for TargetClassifier {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(d)?;
        let format = value
            .get("format")
            .and_then(|f| f.as_str())
            .unwrap_or_default()
            .to_owned();
        let parsed = if format == LOGISTIC_FORMAT {
            serde_json::from_value::<LogisticFile>(value)
                .map_err(Error::from)
                .and_then(|f| TargetClassifier::logistic(f.beta, f.beta0))
        } else if format == crate::numkit::NET_FORMAT {
            serde_json::from_value::<DenseNet>(value)
                .map_err(Error::from)
                .and_then(TargetClassifier::net)
        } else {
            Err(Error::invalid(format!(
                "unknown target classifier format {format:?}"
            )))
        };
        parsed.map_err(D::Error::custom)
    }
}
