//! Trains shift predictors at several faithfulness weights and compares
//! their flip rates and displacement against the exact oracle.
//!
//! ```text
//! cargo run --release --example train_shifter -- 0.01 0.1 1
//! ```

use cflens::classifiers::{train_attribute_classifier, AttributeTrainConfig};
use cflens::shifter::{evaluate_efficacy, train_shift_predictor, ShiftTrainConfig};
use cflens::world::{World, WorldConfig};

fn main() -> cflens::Result<()> {
    let gammas: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("gamma must be a number"))
        .collect();
    let gammas = if gammas.is_empty() {
        vec![0.01, 0.1, 1.0]
    } else {
        gammas
    };

    let world = World::generate(&WorldConfig::reference())?;
    let classifier =
        train_attribute_classifier(&world, &AttributeTrainConfig::default())?.classifier;

    println!("gamma  loss_a  loss_f  min_flip  displacement  oracle");
    for gamma in gammas {
        let cfg = ShiftTrainConfig {
            gamma,
            iterations: 1500,
            ..ShiftTrainConfig::default()
        };
        let training = train_shift_predictor(&cfg, &world, &classifier)?;
        let tail = &training.history[training.history.len() - 100..];
        let mean = |f: fn(&cflens::shifter::LossRecord) -> f64| {
            tail.iter().map(f).sum::<f64>() / tail.len() as f64
        };
        let eff = evaluate_efficacy(&training.predictor, &world, &classifier, 9, 300)?;
        println!(
            "{gamma:<6} {:.4}  {:.4}  {:.3}     {:.3}         {:.3}",
            mean(|r| r.loss_a),
            mean(|r| r.loss_f),
            eff.min_flip_rate(),
            eff.mean_displacement,
            eff.oracle_displacement
        );
    }
    Ok(())
}
