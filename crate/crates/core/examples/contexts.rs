//! Scores for attribute 0 within subgroups fixed by other attributes. The
//! target needs attribute 0 *and* attribute 1, so adding attribute 0 is
//! sufficient only where attribute 1 is already present.

use cflens::causal::{Context, Engine, GroundTruthReadout, Population, ScoreKind};
use cflens::classifiers::TargetClassifier;
use cflens::shifter::{Direction, OracleShift};
use cflens::world::{World, WorldConfig};

fn main() -> cflens::Result<()> {
    let world = World::generate(&WorldConfig::new(8, 3, 64, 5))?;
    let target = TargetClassifier::logistic(vec![4.0, 4.0, 0.0], -6.0)?;
    let oracle = OracleShift(&world);
    let readout = GroundTruthReadout(&world);
    let engine = Engine::new(&world, &oracle, &readout, &target)?;
    // one pass over the population serves every context
    let evaluation = engine.evaluate(&Population::sample(&world, 11, 2000)?)?;

    for text in ["", "attr1=1", "attr1=0", "attr1=1&attr2=0"] {
        let report = evaluation.report(&Context::parse(text, world.m())?)?;
        let nec = report
            .get(0, Direction::Decrease, ScoreKind::Necessity)
            .expect("attribute 0");
        let suf = report
            .get(0, Direction::Increase, ScoreKind::Sufficiency)
            .expect("attribute 0");
        println!(
            "{:<16} NEC-(attr0) = {:<8} (n = {:>4})  SUF+(attr0) = {:<8} (n = {:>4})",
            if text.is_empty() { "<all>" } else { text },
            fmt(nec.estimate),
            nec.n,
            fmt(suf.estimate),
            suf.n
        );
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.3}"))
}
