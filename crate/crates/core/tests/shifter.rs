//! Shift predictor: identity at initialization, loss structure against an
//! independent recomputation, and properties of trained predictors.

mod common;

use cflens::classifiers::AttributeClassifier;
use cflens::numkit::{Activation, DenseNet};
use cflens::shifter::{
    loss_csv, shift_losses, train_shift_predictor, ConditionVector, Direction, LatentShift,
    ShiftPredictor, ShiftTrainConfig,
};
use cflens::world::LatentVector;
use common::{layer, linear_classifier, linear_world, small_world, trained_classifier};

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// (z0, z1, code) -> 2 tanh -> 2 linear, fixed by hand.
const W1: [f64; 6] = [0.4, -0.3, 0.8, 0.1, 0.5, -0.6];
const B1: [f64; 2] = [0.05, -0.1];
const W2: [f64; 4] = [0.7, -0.2, 0.3, 0.9];
const B2: [f64; 2] = [0.1, -0.05];

fn hand_predictor(gamma: f64) -> ShiftPredictor {
    let net = DenseNet::from_layers(
        0,
        vec![
            layer(2, 3, &W1, &B1, Activation::Tanh),
            layer(2, 2, &W2, &B2, Activation::Linear),
        ],
    )
    .unwrap();
    ShiftPredictor::from_net(2, 1, gamma, net).unwrap()
}

/// The same pipeline written out by hand: returns (L_a, L_f) for one sample.
fn straight_line(z: [f64; 2], code: f64) -> (f64, f64) {
    let x = [z[0], z[1], code];
    let h: Vec<f64> = (0..2)
        .map(|r| (W1[3 * r] * x[0] + W1[3 * r + 1] * x[1] + W1[3 * r + 2] * x[2] + B1[r]).tanh())
        .collect();
    let dz: Vec<f64> = (0..2)
        .map(|r| W2[2 * r] * h[0] + W2[2 * r + 1] * h[1] + B2[r])
        .collect();
    let zh = [z[0] + dz[0], z[1] + dz[1]];
    // decoder and classifier of the linear-world fixture
    let img = [
        sig(zh[0]),
        sig(zh[1] + 0.1),
        sig(0.5 * zh[0] - 0.5 * zh[1] - 0.1),
        sig(-zh[0] + 0.3 * zh[1] + 0.2),
    ];
    let p = sig(4.0 * img[0] - img[1] + 0.5 * img[2] - 1.5);
    let la = match code {
        c if c > 0.0 => -p.ln(),
        c if c < 0.0 => -(1.0 - p).ln(),
        _ => 0.0,
    };
    (la, norm(&dz))
}

fn batch() -> (Vec<LatentVector>, Vec<ConditionVector>) {
    let zs = [[0.3, -1.2], [-0.7, 0.4], [1.5, 0.9], [-0.2, -0.1]];
    let codes = [1i8, -1, 0, 1];
    (
        zs.iter().map(|z| LatentVector(z.to_vec())).collect(),
        codes
            .iter()
            .map(|&c| ConditionVector::new(vec![c]).unwrap())
            .collect(),
    )
}

#[test]
fn losses_match_straight_line_recomputation() {
    let world = linear_world();
    let classifier = linear_classifier();
    let (zs, conds) = batch();
    let gamma = 0.3;
    let got = shift_losses(
        &hand_predictor(gamma),
        &zs,
        &conds,
        &world,
        &classifier,
        gamma,
    )
    .unwrap();
    let (mut la, mut lf) = (0.0, 0.0);
    for (z, c) in zs.iter().zip(&conds) {
        let (a, f) = straight_line([z[0], z[1]], f64::from(c.codes()[0]));
        la += a / 4.0;
        lf += f / 4.0;
    }
    assert!((got.loss_a - la).abs() < 1e-12, "{} vs {la}", got.loss_a);
    assert!((got.loss_f - lf).abs() < 1e-12, "{} vs {lf}", got.loss_f);
    assert!((got.total - (la + gamma * lf)).abs() < 1e-12);
}

#[test]
fn loss_gradient_matches_central_differences() {
    let world = linear_world();
    let classifier = linear_classifier();
    let (zs, conds) = batch();
    let gamma = 0.7;
    let base = hand_predictor(gamma);
    let analytic = shift_losses(&base, &zs, &conds, &world, &classifier, gamma)
        .unwrap()
        .grads
        .flat_params();
    let params = base.net().params();
    let total = |p: &[f64]| {
        let mut net = base.net().clone();
        net.set_params(p).unwrap();
        let pred = ShiftPredictor::from_net(2, 1, gamma, net).unwrap();
        shift_losses(&pred, &zs, &conds, &world, &classifier, gamma)
            .unwrap()
            .total
    };
    let eps = 1e-6;
    for k in 0..params.len() {
        let mut up = params.clone();
        let mut down = params.clone();
        up[k] += eps;
        down[k] -= eps;
        let numeric = (total(&up) - total(&down)) / (2.0 * eps);
        let err = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-8);
        assert!(err < 1e-4, "param {k}: {} vs {numeric}", analytic[k]);
    }
}

#[test]
fn fresh_predictor_is_the_identity() {
    let world = small_world();
    let pred = ShiftPredictor::new(8, 3, &[128, 128], 5).unwrap();
    for (k, z) in world.sample_latents(3, 50).unwrap().iter().enumerate() {
        let codes = vec![(k % 3) as i8 - 1, 1, -1];
        let cond = ConditionVector::new(codes).unwrap();
        assert_eq!(&pred.predict_shift(z, &cond).unwrap(), z);
    }
}

#[test]
fn untrained_faithfulness_loss_is_zero_and_additivity_holds() {
    let world = linear_world();
    let classifier = linear_classifier();
    let (zs, conds) = batch();
    let fresh = ShiftPredictor::new(2, 1, &[8], 0).unwrap();
    let l = shift_losses(&fresh, &zs, &conds, &world, &classifier, 0.1).unwrap();
    assert_eq!(l.loss_f, 0.0);

    let pred = hand_predictor(0.0);
    let reference = shift_losses(&pred, &zs, &conds, &world, &classifier, 0.0).unwrap();
    assert_eq!(reference.total, reference.loss_a);
    for gamma in [0.0, 0.1, 1.0, 10.0] {
        let l = shift_losses(&pred, &zs, &conds, &world, &classifier, gamma).unwrap();
        assert_eq!(l.loss_a, reference.loss_a);
        assert_eq!(l.loss_f, reference.loss_f);
        assert!((l.total - (l.loss_a + gamma * l.loss_f)).abs() <= 1e-15 * l.total.abs().max(1.0));
    }
}

#[test]
fn masked_attribute_output_has_no_influence() {
    let world = small_world();
    let net = DenseNet::new(4, &[64, 16, 3], &[Activation::Tanh, Activation::Sigmoid]).unwrap();
    let mut altered = net.clone();
    let mut params = altered.params();
    // last layer is 16 -> 3; rewrite row 2 of its weights and its bias
    let last_w = params.len() - 3 - 48;
    for c in 0..16 {
        params[last_w + 2 * 16 + c] += 0.75;
    }
    *params.last_mut().unwrap() -= 2.0;
    altered.set_params(&params).unwrap();
    let a = AttributeClassifier::from_net(net).unwrap();
    let b = AttributeClassifier::from_net(altered).unwrap();

    let zs = world.sample_latents(8, 16).unwrap();
    let conds: Vec<ConditionVector> = (0..16)
        .map(|j| ConditionVector::new(vec![[1, -1, 0][j % 3], [-1, 0, 1][j % 3], 0]).unwrap())
        .collect();
    let pred = ShiftPredictor::from_net(
        8,
        3,
        0.1,
        DenseNet::new(6, &[11, 16, 8], &[Activation::Tanh, Activation::Linear]).unwrap(),
    )
    .unwrap();
    // the altered output really differs
    let img = world.decode(&zs[0]).unwrap();
    assert_ne!(a.predict(&img).unwrap()[2], b.predict(&img).unwrap()[2]);

    let la = shift_losses(&pred, &zs, &conds, &world, &a, 0.1).unwrap();
    let lb = shift_losses(&pred, &zs, &conds, &world, &b, 0.1).unwrap();
    assert_eq!(la.loss_a, lb.loss_a);
    assert_eq!(la.loss_f, lb.loss_f);
    assert_eq!(la.grads, lb.grads);
}

#[test]
fn all_unset_batch_trains_on_faithfulness_only() {
    let world = linear_world();
    let classifier = linear_classifier();
    let (zs, _) = batch();
    let conds = vec![ConditionVector::unset(1); zs.len()];
    let l = shift_losses(&hand_predictor(0.1), &zs, &conds, &world, &classifier, 0.1).unwrap();
    assert!(l.fully_masked);
    assert_eq!(l.loss_a, 0.0);
    assert!(l.loss_f > 0.0);
}

fn mean_displacement(pred: &ShiftPredictor, probes: &[LatentVector], m: usize) -> f64 {
    let mut total = 0.0;
    for (k, z) in probes.iter().enumerate() {
        let dir = Direction::BOTH[k % 2];
        let cond = ConditionVector::single(m, k % m, dir).unwrap();
        let zh = pred.shift(z, &cond).unwrap();
        total += norm(
            &zh.iter()
                .zip(z.iter())
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
    }
    total / probes.len() as f64
}

#[test]
fn trained_predictors_behave() {
    let world = small_world();
    let classifier = trained_classifier(&world);
    let world_before = world.clone();
    let classifier_before = classifier.clone();

    let cfg = |gamma, iterations| ShiftTrainConfig {
        gamma,
        iterations,
        batch_size: 32,
        seed: 3,
        ..Default::default()
    };

    // zero iterations leave the identity initialization untouched
    let idle = train_shift_predictor(&cfg(0.1, 0), &world, &classifier).unwrap();
    assert!(idle.history.is_empty());
    assert_eq!(
        idle.predictor.net(),
        ShiftPredictor::new(8, 3, &[128, 128], 3).unwrap().net()
    );

    // determinism
    let a = train_shift_predictor(&cfg(0.1, 40), &world, &classifier).unwrap();
    let b = train_shift_predictor(&cfg(0.1, 40), &world, &classifier).unwrap();
    assert_eq!(a.predictor, b.predictor);
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.len(), 40);
    assert!(loss_csv(&a.history).starts_with("iter,loss_a,loss_f,loss_total\n0,"));

    // larger faithfulness weight, smaller displacement
    let probes = world.sample_latents(4242, 500).unwrap();
    let mut displacement = Vec::new();
    let mut mid = None;
    for gamma in [0.01, 0.1, 1.0] {
        let t = train_shift_predictor(&cfg(gamma, 800), &world, &classifier).unwrap();
        displacement.push(mean_displacement(&t.predictor, &probes, 3));
        if gamma == 0.1 {
            mid = Some(t.predictor);
        }
    }
    assert!(
        displacement.windows(2).all(|w| w[1] <= w[0]),
        "{displacement:?}"
    );

    // with no attribute requested the shift stays smaller than with one
    let pred = mid.unwrap();
    let unset: f64 = probes
        .iter()
        .map(|z| {
            let zh = pred.shift(z, &ConditionVector::unset(3)).unwrap();
            norm(
                &zh.iter()
                    .zip(z.iter())
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            )
        })
        .sum::<f64>()
        / probes.len() as f64;
    assert!(unset <= mean_displacement(&pred, &probes, 3), "{unset}");

    // supervision stayed frozen
    assert_eq!(world, world_before);
    assert_eq!(classifier, classifier_before);
}

#[test]
fn training_requires_a_validated_classifier() {
    let world = small_world();
    let raw =
        AttributeClassifier::from_net(DenseNet::new(0, &[64, 3], &[Activation::Sigmoid]).unwrap())
            .unwrap();
    let cfg = ShiftTrainConfig {
        iterations: 1,
        ..Default::default()
    };
    assert!(train_shift_predictor(&cfg, &world, &raw).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shifter.json");
    let pred = hand_predictor(0.25);
    pred.save(&path).unwrap();
    let back = ShiftPredictor::load(&path).unwrap();
    assert_eq!(back, pred);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"format\": \"cflens-shifter-v1\""));
}
