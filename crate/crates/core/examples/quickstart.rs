//! End-to-end run on a small world: fit the attribute classifier, train the
//! shift predictor, then explain a logistic target classifier.
//!
//! ```text
//! cargo run --release --example quickstart
//! ```

use cflens::causal::{Engine, Population};
use cflens::classifiers::{train_attribute_classifier, AttributeTrainConfig, TargetClassifier};
use cflens::shifter::{train_shift_predictor, ShiftTrainConfig};
use cflens::world::{World, WorldConfig};

fn main() -> cflens::Result<()> {
    let world = World::generate(&WorldConfig::new(8, 3, 64, 1))?;
    let classifier =
        train_attribute_classifier(&world, &AttributeTrainConfig::default())?.classifier;
    println!("attribute accuracy: {:?}", classifier.accuracy());

    let cfg = ShiftTrainConfig {
        iterations: 1000,
        ..ShiftTrainConfig::default()
    };
    let shifter = train_shift_predictor(&cfg, &world, &classifier)?.predictor;

    // positive when attribute 0 is present and attribute 1 absent
    let target = TargetClassifier::logistic(vec![1.5, -1.0, 0.5], 0.0)?;
    let engine = Engine::new(&world, &shifter, &classifier, &target)?;
    let population = Population::sample(&world, 2024, 300)?;
    print!("{}", engine.global_scores(&population)?.to_csv());
    Ok(())
}
