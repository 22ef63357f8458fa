//! A two-dimensional world with one attribute, explained under exact oracle
//! shifts and a perfect attribute readout. The target is the attribute
//! itself, so flipping the attribute always flips the prediction.

use cflens::causal::{Engine, GroundTruthReadout, Population};
use cflens::classifiers::TargetClassifier;
use cflens::shifter::OracleShift;
use cflens::world::{World, WorldConfig};

fn main() -> cflens::Result<()> {
    let world = World::generate(&WorldConfig::new(2, 1, 16, 3).with_offsets(vec![0.25]))?;
    let plane = &world.planes()[0];
    println!("plane w = {:.3?}, b = {:.3}", plane.w, plane.b);

    let oracle = OracleShift(&world);
    let readout = GroundTruthReadout(&world);
    let target = TargetClassifier::logistic(vec![10.0], -5.0)?;
    let engine = Engine::new(&world, &oracle, &readout, &target)?;
    let evaluation = engine.evaluate(&Population::sample(&world, 1, 10_000)?)?;
    println!(
        "positives: {} of {}",
        evaluation.positives(),
        evaluation.len()
    );
    for entry in &evaluation
        .report(&cflens::causal::Context::empty())?
        .entries
    {
        println!(
            "{}{} {:?}: k = {}, n = {}",
            entry.kind,
            entry.direction.symbol(),
            entry.score.estimate,
            entry.score.k,
            entry.score.n
        );
    }
    Ok(())
}
