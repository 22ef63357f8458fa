//! The shift predictor: a residual network `z_hat = z + net(z, codes)` that
//! moves a latent so the decoded image shows the requested attribute changes,
//! trained through the frozen decoder and attribute classifier.

mod condition;
mod efficacy;
mod losses;
mod predictor;
mod train;

pub use condition::{ConditionVector, Direction};
pub use efficacy::{evaluate_efficacy, EfficacyReport};
pub use losses::{shift_losses, ShiftChain, ShiftLosses};
pub use predictor::{LatentShift, OracleShift, ShiftPredictor, SHIFTER_FORMAT};
pub use train::{
    loss_csv, train_shift_predictor, write_loss_csv, LossRecord, ShiftTrainConfig, ShiftTraining,
};
