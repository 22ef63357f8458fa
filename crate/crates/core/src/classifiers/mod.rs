//! The attribute classifier used to supervise the shift predictor, and the
//! black-box target classifier whose decisions are explained.

mod attribute;
mod target;

pub use attribute::{
    train_attribute_classifier, AttributeClassifier, AttributeTrainConfig, AttributeTraining,
    MIN_MEAN_ACCURACY,
};
pub use target::{TargetClassifier, TargetInput, TargetOutput, LOGISTIC_FORMAT, THRESHOLD};
