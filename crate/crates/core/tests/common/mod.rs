//! Fixtures shared by the integration test binaries.
#![allow(dead_code)]

use cflens::classifiers::{train_attribute_classifier, AttributeClassifier, AttributeTrainConfig};
use cflens::numkit::{Activation, DenseNet, Layer};
use cflens::world::{Plane, World, WorldConfig};

/// d = 8, m = 3, n = 64: small enough to train against in seconds.
pub fn small_world() -> World {
    World::generate(&WorldConfig::new(8, 3, 64, 1)).unwrap()
}

pub fn trained_classifier(world: &World) -> AttributeClassifier {
    train_attribute_classifier(
        world,
        &AttributeTrainConfig {
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap()
    .classifier
}

/// A dense layer from explicit row-major weights.
pub fn layer(rows: usize, cols: usize, w: &[f64], b: &[f64], act: Activation) -> Layer {
    let mut l = Layer::zeros(cols, rows, act);
    l.w.copy_from_slice(w);
    l.b.copy_from_slice(b);
    l
}

/// d = 2, one attribute plane along the first axis, 2 -> 4 sigmoid decoder.
pub fn linear_world() -> World {
    let decoder = DenseNet::from_layers(
        0,
        vec![layer(
            4,
            2,
            &[1.0, 0.0, 0.0, 1.0, 0.5, -0.5, -1.0, 0.3],
            &[0.0, 0.1, -0.1, 0.2],
            Activation::Sigmoid,
        )],
    )
    .unwrap();
    World::from_parts(
        0,
        0.5,
        vec![Plane {
            w: vec![1.0, 0.0],
            b: 0.0,
        }],
        decoder,
    )
    .unwrap()
}

/// Reads attribute 0 of [`linear_world`] from its first two pixels.
pub fn linear_classifier() -> AttributeClassifier {
    let net = DenseNet::from_layers(
        0,
        vec![layer(
            1,
            4,
            &[4.0, -1.0, 0.5, 0.0],
            &[-1.5],
            Activation::Sigmoid,
        )],
    )
    .unwrap();
    AttributeClassifier::from_net(net).unwrap()
}
