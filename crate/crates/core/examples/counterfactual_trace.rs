//! Follows one latent code through a counterfactual: predicted shift,
//! decoded images, attribute readouts and the target's response, next to
//! the exact oracle answer. Images are written as PGM files.

use cflens::causal::{Engine, GroundTruthReadout, Intervention};
use cflens::classifiers::TargetClassifier;
use cflens::shifter::{Direction, OracleShift};
use cflens::world::{pgm, World, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = World::generate(&WorldConfig::new(8, 3, 64, 1))?;
    let target = TargetClassifier::logistic(vec![2.0, -1.0, 1.0], -0.5)?;
    let oracle = OracleShift(&world);
    let readout = GroundTruthReadout(&world);
    let engine = Engine::new(&world, &oracle, &readout, &target)?;

    let z = world.sample_latent(0, 4);
    let before = world.true_attributes(&z)?;
    let direction = if before[0] {
        Direction::Decrease
    } else {
        Direction::Increase
    };
    let iv = Intervention::single(world.m(), 0, direction)?;
    let record = engine.counterfactual(&z, &iv)?;

    let moved: f64 = record
        .z
        .0
        .iter()
        .zip(&record.z_hat.0)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    println!(
        "intervention attr0{}: |z_hat - z| = {moved:.3}",
        direction.symbol()
    );
    println!(
        "attributes  {:?} -> {:?}",
        record.attrs_before, record.attrs_after
    );
    println!(
        "target      {:.3} ({}) -> {:.3} ({})",
        record.target_before.probability,
        record.target_before.class,
        record.target_after.probability,
        record.target_after.class
    );

    let dir = std::env::temp_dir().join("cflens-trace");
    std::fs::create_dir_all(&dir)?;
    pgm::write_image(&dir.join("factual.pgm"), &record.image.0)?;
    pgm::write_image(&dir.join("counterfactual.pgm"), &record.cf_image.0)?;
    println!("images in {}", dir.display());
    Ok(())
}
