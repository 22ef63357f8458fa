//! Scores a logistic target over six attributes and checks that the
//! estimated necessity and sufficiency rank attributes the way the
//! coefficients do. Uses oracle shifts and the true attributes, so it runs
//! without any training.

use cflens::causal::{Alignment, Engine, GroundTruthReadout, Population};
use cflens::classifiers::TargetClassifier;
use cflens::shifter::OracleShift;
use cflens::world::{World, WorldConfig};

fn main() -> cflens::Result<()> {
    let beta = vec![1.5, 1.0, -1.5, -1.0, 0.5, -0.5];
    let world = World::generate(&WorldConfig::new(16, 6, 64, 1))?;
    let target = TargetClassifier::logistic(beta.clone(), 0.0)?;
    let oracle = OracleShift(&world);
    let readout = GroundTruthReadout(&world);
    let engine = Engine::new(&world, &oracle, &readout, &target)?;
    let report = engine.global_scores(&Population::sample(&world, 2024, 1000)?)?;

    let alignment = Alignment::new(&beta, &report)?;
    print!("{}", cflens::causal::baseline_csv(&alignment));
    for (name, rho) in alignment.correlations() {
        println!(
            "{name}: {}",
            rho.map_or("undefined".into(), |r| format!("{r:.3}"))
        );
    }
    Ok(())
}
