//! Compares reverse-mode gradients with central finite differences for a
//! standalone network and for the full shift chain (predictor, decoder,
//! attribute classifier).

use cflens::classifiers::AttributeClassifier;
use cflens::numkit::{finite_diff_check, Activation, DenseNet, Reduction};
use cflens::shifter::{ShiftChain, ShiftPredictor};
use cflens::world::{World, WorldConfig};

fn main() -> cflens::Result<()> {
    let net = DenseNet::new(
        42,
        &[6, 16, 16, 3],
        &[Activation::Tanh, Activation::Relu, Activation::Sigmoid],
    )?;
    let x = [0.3, -0.7, 1.1, 0.05, -0.4, 0.9];
    for head in [
        Reduction::Sum,
        Reduction::HalfSquaredNorm,
        Reduction::Dot(vec![1.0, -2.0, 0.5]),
    ] {
        println!(
            "dense net, {head:?}: {:.2e}",
            finite_diff_check(&net, &x, &head, 1e-5)
        );
    }

    let world = World::generate(&WorldConfig::new(6, 2, 36, 3))?;
    // an untrained classifier is enough to exercise the backward pass
    let classifier = AttributeClassifier::from_net(DenseNet::new(
        4,
        &[36, 24, 2],
        &[Activation::Tanh, Activation::Sigmoid],
    )?)?;
    let m_net = DenseNet::new(
        5,
        &[8, 24, 24, 6],
        &[Activation::Tanh, Activation::Tanh, Activation::Linear],
    )?;
    let chain = ShiftChain::new(
        ShiftPredictor::from_net(6, 2, 0.1, m_net)?,
        &world,
        &classifier,
    )?;
    let mut input = world.sample_latent(0, 0).0;
    input.extend([1.0, -1.0]);
    println!(
        "shift chain: {:.2e}",
        finite_diff_check(&chain, &input, &Reduction::Sum, 1e-5)
    );
    Ok(())
}
