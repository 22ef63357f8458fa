//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time budget.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cflens::causal::{
    AttributeReadout, Context, Engine, GroundTruthReadout, Population, ScoreKind,
};
use cflens::classifiers::{
    train_attribute_classifier, AttributeClassifier, AttributeTrainConfig, TargetClassifier,
};
use cflens::cli::{run, Exit};
use cflens::numkit::{finite_diff_check, Activation, DenseNet, Differentiable, Reduction};
use cflens::shifter::{
    evaluate_efficacy, train_shift_predictor, Direction, OracleShift, ShiftChain, ShiftPredictor,
    ShiftTrainConfig,
};
use cflens::world::{LatentVector, World, WorldConfig};

const GRAD_TOL: f64 = 1e-4;
const GRAD_EPS: f64 = 1e-5;
const GRAD_PROBES: u64 = 16;
const MICRO_TOL: f64 = 0.02;
const MICRO_SAMPLES: usize = 10_000;
const MICRO_GRID: usize = 100;
const MIN_FLIP_RATE: f64 = 0.9;
const MAX_DISPLACEMENT_RATIO: f64 = 3.0;
const EFFICACY_SAMPLES: usize = 500;
const MIN_RHO: f64 = 0.8;
const POPULATION: usize = 200;
const REFERENCE_BETA: &str = "1.5,1,-1.5,-1,0.5,-0.5";
/// Faithfulness weight for the linear-baseline run; see the README.
const BASELINE_GAMMA: &str = "0.3";

type Check = Result<String, String>;

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
}

fn report(c: &Criterion, outcome: Check, elapsed: Duration) -> bool {
    let in_time = elapsed <= c.budget;
    let (ok, detail) = match outcome {
        Ok(d) => (in_time, d),
        Err(d) => (false, d),
    };
    let time = format!("{:.1} s of {} s", elapsed.as_secs_f64(), c.budget.as_secs());
    let time = if in_time {
        time
    } else {
        format!("{time}, over budget")
    };
    println!(
        "{} criterion {}: {}: {detail} [{time}]",
        if ok { "PASS" } else { "FAIL" },
        c.id,
        c.name
    );
    ok
}

fn check(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

/// The reference world (d = 16, m = 4, n = 64, seed 1) with its attribute classifier.
struct Reference {
    world: World,
    classifier: AttributeClassifier,
}

fn reference() -> Result<Reference, String> {
    let world = World::generate(&WorldConfig::reference()).map_err(err)?;
    let classifier = train_attribute_classifier(&world, &AttributeTrainConfig::default())
        .map_err(err)?
        .classifier;
    Ok(Reference { world, classifier })
}

fn probe_input(world: &World, i: u64) -> Vec<f64> {
    let mut x = world.sample_latent(31, i).0;
    let m = world.m() as u64;
    x.extend((0..m).map(|k| [-1.0, 0.0, 1.0][((i + k) % 3) as usize]));
    x
}

fn worst_over_probes<M: Differentiable + Clone>(
    model: &M,
    input: impl Fn(u64) -> Vec<f64>,
    out_dim: usize,
) -> f64 {
    (0..GRAD_PROBES)
        .map(|i| {
            let head = match i % 3 {
                0 => Reduction::Sum,
                1 => Reduction::HalfSquaredNorm,
                _ => Reduction::Dot((0..out_dim).map(|k| ((k + 1) as f64).sin()).collect()),
            };
            finite_diff_check(model, &input(i), &head, GRAD_EPS)
        })
        .fold(0.0, f64::max)
}

fn gradient_suite(r: &Reference) -> Check {
    let world = &r.world;
    let latent = |i| world.sample_latent(30, i).0;
    let image = |i| world.decode(&world.sample_latent(32, i)).unwrap().0;
    let target =
        DenseNet::new(5, &[64, 16, 1], &[Activation::Tanh, Activation::Sigmoid]).map_err(err)?;
    let shifter = DenseNet::new(
        6,
        &[20, 128, 128, 16],
        &[Activation::Tanh, Activation::Tanh, Activation::Linear],
    )
    .map_err(err)?;
    // default depth, width 32, random head; see the README for width 128
    let chain_net = DenseNet::new(
        7,
        &[20, 32, 32, 16],
        &[Activation::Tanh, Activation::Tanh, Activation::Linear],
    )
    .map_err(err)?;
    let chain = ShiftChain::new(
        ShiftPredictor::from_net(16, 4, 0.1, chain_net).map_err(err)?,
        world,
        &r.classifier,
    )
    .map_err(err)?;

    let results = [
        ("decoder", worst_over_probes(world.decoder(), latent, 64)),
        (
            "attribute classifier",
            worst_over_probes(r.classifier.net(), image, 4),
        ),
        ("target net", worst_over_probes(&target, image, 1)),
        (
            "shift net",
            worst_over_probes(&shifter, |i| probe_input(world, i), 16),
        ),
        (
            "C.G.M chain",
            worst_over_probes(&chain, |i| probe_input(world, i), 4),
        ),
    ];
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail = results
        .iter()
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        worst <= GRAD_TOL,
        format!("max rel err {worst:.1e} <= {GRAD_TOL:e} ({detail})"),
    )
}

/// NEC+, NEC-, SUF+, SUF- and the positive fraction.
type MicroScores = [f64; 5];

/// Weighted quadrature over a grid of the 2-d standard normal prior, using
/// the closed-form oracle displacement directly.
fn micro_brute_force(world: &World, readout: &dyn AttributeReadout) -> MicroScores {
    let plane = &world.planes()[0];
    let mu = world.margin();
    let classify = |z: &[f64]| {
        let z = LatentVector(z.to_vec());
        let img = world.decode(&z).unwrap();
        readout.read(&z, &img).unwrap()[0] > 0.5
    };
    let moved = |z: &[f64], up: bool| {
        let s = if up { mu } else { -mu };
        let step = s - (plane.w[0] * z[0] + plane.w[1] * z[1] + plane.b);
        [z[0] + step * plane.w[0], z[1] + step * plane.w[1]]
    };
    let (lo, hi) = (-4.0, 4.0);
    let h = (hi - lo) / MICRO_GRID as f64;
    let mut mass = [0.0; 2];
    // [positive|negative][up|down] weighted flips
    let mut flips = [[0.0; 2]; 2];
    for a in 0..MICRO_GRID {
        for b in 0..MICRO_GRID {
            let z = [lo + (a as f64 + 0.5) * h, lo + (b as f64 + 0.5) * h];
            let weight = (-(z[0] * z[0] + z[1] * z[1]) / 2.0).exp();
            let y = classify(&z);
            let side = usize::from(!y);
            mass[side] += weight;
            for (k, up) in [true, false].into_iter().enumerate() {
                if classify(&moved(&z, up)) != y {
                    flips[side][k] += weight;
                }
            }
        }
    }
    [
        flips[0][0] / mass[0],
        flips[0][1] / mass[0],
        flips[1][0] / mass[1],
        flips[1][1] / mass[1],
        mass[0] / (mass[0] + mass[1]),
    ]
}

fn micro_pipeline(world: &World, readout: &dyn AttributeReadout) -> Result<MicroScores, String> {
    let oracle = OracleShift(world);
    // indicator of the single attribute
    let target = TargetClassifier::logistic(vec![10.0], -5.0).map_err(err)?;
    let engine = Engine::new(world, &oracle, readout, &target).map_err(err)?;
    let population = Population::sample(world, 77, MICRO_SAMPLES).map_err(err)?;
    let evaluation = engine.evaluate(&population).map_err(err)?;
    let get = |dir, kind| {
        evaluation
            .score(0, dir, kind, &Context::empty())
            .map_err(err)?
            .estimate
            .ok_or_else(|| "undefined score".to_string())
    };
    Ok([
        get(Direction::Increase, ScoreKind::Necessity)?,
        get(Direction::Decrease, ScoreKind::Necessity)?,
        get(Direction::Increase, ScoreKind::Sufficiency)?,
        get(Direction::Decrease, ScoreKind::Sufficiency)?,
        evaluation.positives() as f64 / evaluation.len() as f64,
    ])
}

fn micro_world() -> Check {
    let cfg = WorldConfig::new(2, 1, 16, 3).with_offsets(vec![0.25]);
    let world = World::generate(&cfg).map_err(err)?;
    let trained = train_attribute_classifier(&world, &AttributeTrainConfig::default())
        .map_err(err)?
        .classifier;
    let truth = GroundTruthReadout(&world);
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (name, readout) in [
        ("true readout", &truth as &dyn AttributeReadout),
        ("trained readout", &trained),
    ] {
        let pipeline = micro_pipeline(&world, readout)?;
        let grid = micro_brute_force(&world, readout);
        let diff = pipeline
            .iter()
            .zip(&grid)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
        let fmt = |v: &MicroScores| {
            v.iter()
                .map(|x| format!("{x:.3}"))
                .collect::<Vec<_>>()
                .join("/")
        };
        detail.push(format!("{name} {} vs grid {}", fmt(&pipeline), fmt(&grid)));
    }
    check(
        worst <= MICRO_TOL,
        format!(
            "max |diff| {worst:.4} <= {MICRO_TOL} over NEC+/NEC-/SUF+/SUF-/P(Y=1); {}",
            detail.join("; ")
        ),
    )
}

fn efficacy(r: &Reference) -> Check {
    let cfg = ShiftTrainConfig::default();
    let training = train_shift_predictor(&cfg, &r.world, &r.classifier).map_err(err)?;
    let h = &training.history;
    let w = 100.min(h.len());
    let first = h[..w].iter().map(|x| x.loss_a).sum::<f64>() / w as f64;
    let last = h[h.len() - w..].iter().map(|x| x.loss_a).sum::<f64>() / w as f64;
    let eff = evaluate_efficacy(
        &training.predictor,
        &r.world,
        &r.classifier,
        9001,
        EFFICACY_SAMPLES,
    )
    .map_err(err)?;
    let ratio = eff.mean_displacement / eff.oracle_displacement;
    check(
        eff.min_flip_rate() >= MIN_FLIP_RATE && ratio <= MAX_DISPLACEMENT_RATIO,
        format!(
            "min flip rate {:.3} >= {MIN_FLIP_RATE}, displacement {:.3} = {ratio:.2} x oracle {:.3} <= {MAX_DISPLACEMENT_RATIO} x \
             (gamma {}, b {}, {} iterations, L_a window mean {first:.3} -> {last:.4})",
            eff.min_flip_rate(),
            eff.mean_displacement,
            eff.oracle_displacement,
            cfg.gamma,
            cfg.batch_size,
            cfg.iterations,
        ),
    )
}

fn cli(args: &[&str]) -> Exit {
    run(std::iter::once("cflens").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn baseline(dir: &Path) -> Check {
    let out = s(dir);
    let steps: [&[&str]; 4] = [
        &[
            "gen-world",
            "--d",
            "16",
            "--m",
            "6",
            "--n",
            "64",
            "--seed",
            "1",
            "--out",
            out,
        ],
        &["train", "attributes", "--out", out],
        &["train", "shifter", "--gamma", BASELINE_GAMMA, "--out", out],
        &[
            "baseline",
            "--beta",
            REFERENCE_BETA,
            "--population",
            "200",
            "--out",
            out,
        ],
    ];
    for step in steps {
        let exit = cli(step);
        if !matches!(exit, Exit::Success | Exit::Undefined) {
            return Err(format!("`{}` exited with {exit:?}", step.join(" ")));
        }
    }
    let text = std::fs::read_to_string(dir.join("baseline.csv")).map_err(err)?;
    let rho = |name: &str| -> Option<f64> {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("# {name},")))
            .and_then(|v| v.parse().ok())
    };
    let suf = rho("rho(beta,SUF+)");
    let nec = rho("rho(-beta,NEC+)");
    let others = [rho("rho(-beta,SUF-)"), rho("rho(beta,NEC-)")];
    let show = |v: Option<f64>| v.map_or("undefined".into(), |x| format!("{x:.3}"));
    check(
        suf.is_some_and(|v| v >= MIN_RHO) && nec.is_some_and(|v| v >= MIN_RHO),
        format!(
            "rho(beta,SUF+) {} and rho(-beta,NEC+) {} >= {MIN_RHO} (also rho(-beta,SUF-) {}, rho(beta,NEC-) {}; gamma {BASELINE_GAMMA})",
            show(suf),
            show(nec),
            show(others[0]),
            show(others[1]),
        ),
    )
}

fn coherence(dir: &Path) -> Check {
    let world = World::load(&dir.join("world.json")).map_err(err)?;
    let classifier = AttributeClassifier::load(&dir.join("attributes.json")).map_err(err)?;
    let shifter = ShiftPredictor::load(&dir.join("shifter.json")).map_err(err)?;
    let target = TargetClassifier::load(&dir.join("target.json")).map_err(err)?;
    let engine = Engine::new(&world, &shifter, &classifier, &target).map_err(err)?;
    let population = Population::sample(&world, 2024, POPULATION).map_err(err)?;
    let cached = engine.evaluate(&population).map_err(err)?;

    let global = engine.global_scores(&population).map_err(err)?;
    let empty = cached.report(&Context::empty()).map_err(err)?;
    let identical = empty == global && empty.to_csv() == global.to_csv();

    let mut mismatches = 0;
    for j in 0..world.m() {
        let on = cached
            .report(&Context::new(vec![(j, true)]).map_err(err)?)
            .map_err(err)?;
        let off = cached
            .report(&Context::new(vec![(j, false)]).map_err(err)?)
            .map_err(err)?;
        for ((g, a), b) in global.entries.iter().zip(&on.entries).zip(&off.entries) {
            if a.score.n + b.score.n != g.score.n {
                mismatches += 1;
            }
        }
    }
    check(
        identical && mismatches == 0,
        format!(
            "empty context bit-identical to global: {identical}; complementary contexts attr<j>=1 / attr<j>=0 \
             for j < {}: {mismatches} denominator mismatches over {} entries",
            world.m(),
            world.m() * global.entries.len()
        ),
    )
}

fn explain_args(out: &Path, target: &Path) -> Vec<String> {
    ["explain", "--out", s(out), "--target", s(target)]
        .iter()
        .map(|x| x.to_string())
        .collect()
}

fn inputs(dir: &Path) -> Vec<String> {
    ["world", "attributes", "shifter"]
        .iter()
        .flat_map(|k| {
            [
                format!("--{k}"),
                s(&dir.join(format!("{k}.json"))).to_string(),
            ]
        })
        .collect()
}

fn binary(args: &[String], threads: &str) -> Result<Option<i32>, String> {
    Command::new(env!("CARGO_BIN_EXE_cflens"))
        .args(args)
        .env("CFLENS_THREADS", threads)
        .output()
        .map(|o| o.status.code())
        .map_err(err)
}

fn determinism(dir: &Path) -> Check {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    let target = dir.join("target.json");
    let mut first = explain_args(a.path(), &target);
    first.extend(inputs(dir));
    let exit = run(std::iter::once("cflens".to_string()).chain(first.clone()));
    let mut second = explain_args(b.path(), &target);
    second.extend(inputs(dir));
    let code = binary(&second, "3")?;
    let csv_a = std::fs::read(a.path().join("scores.csv")).map_err(err)?;
    let csv_b = std::fs::read(b.path().join("scores.csv")).map_err(err)?;
    check(
        csv_a == csv_b && !csv_a.is_empty(),
        format!(
            "scores.csv byte-identical across an in-process run ({exit:?}) and a 3-thread binary run (exit {code:?}): {} ({} bytes)",
            csv_a == csv_b,
            csv_a.len()
        ),
    )
}

fn degenerate(dir: &Path) -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for positive in [true, false] {
        let out = tempfile::tempdir().map_err(err)?;
        let target = out.path().join("target.json");
        let t = if positive {
            TargetClassifier::constant_positive(6)
        } else {
            TargetClassifier::constant_negative(6)
        };
        t.save(&target).map_err(err)?;
        let mut args = explain_args(out.path(), &target);
        args.extend(inputs(dir));
        let code = binary(&args, "1")?;
        let csv = std::fs::read_to_string(out.path().join("scores.csv")).map_err(err)?;
        let (zero_kind, undefined_kind) = if positive {
            ("NEC", "SUF")
        } else {
            ("SUF", "NEC")
        };
        let mut zeros = 0;
        let mut undefined = 0;
        for row in csv.lines().skip(1) {
            let c: Vec<&str> = row.split(',').collect();
            if c[2] == zero_kind && c[3] == "0" && c[4] == "0" && c[5] == POPULATION.to_string() {
                zeros += 1;
            }
            if c[2] == undefined_kind && c[3].is_empty() && c[5] == "0" {
                undefined += 1;
            }
        }
        let pass = code == Some(4) && zeros == 12 && undefined == 12;
        ok &= pass;
        lines.push(format!(
            "constant-{}: exit {code:?}, {zeros}/12 {zero_kind} = 0, {undefined}/12 {undefined_kind} undefined",
            if positive { "positive" } else { "negative" }
        ));
    }
    check(ok, lines.join("; "))
}

fn main() {
    let started = Instant::now();
    let run_dir = tempfile::tempdir().expect("temporary directory");
    let mut reference_world: Option<Result<Reference, String>> = None;
    let mut all = true;

    let timed = |c: Criterion, f: &mut dyn FnMut() -> Check| {
        let t = Instant::now();
        let outcome = f();
        report(&c, outcome, t.elapsed())
    };

    let crit = |id, name, secs| Criterion {
        id,
        name,
        budget: Duration::from_secs(secs),
    };

    all &= timed(crit(1, "gradient oracle suite", 30), &mut || {
        let r = reference_world
            .get_or_insert_with(reference)
            .as_ref()
            .map_err(|e| e.clone())?;
        gradient_suite(r)
    });
    all &= timed(crit(2, "micro-world exactness", 60), &mut micro_world);
    all &= timed(crit(3, "shift-predictor efficacy", 600), &mut || {
        let r = reference_world
            .get_or_insert_with(reference)
            .as_ref()
            .map_err(|e| e.clone())?;
        efficacy(r)
    });
    all &= timed(crit(4, "linear-baseline alignment", 900), &mut || {
        baseline(run_dir.path())
    });
    all &= timed(crit(5, "contextual coherence", 60), &mut || {
        coherence(run_dir.path())
    });
    all &= timed(crit(6, "determinism", 300), &mut || {
        determinism(run_dir.path())
    });
    all &= timed(crit(7, "degenerate classifiers", 60), &mut || {
        degenerate(run_dir.path())
    });

    println!(
        "acceptance: {} in {:.1} s",
        if all { "all criteria pass" } else { "FAILED" },
        started.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
