use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    BaselineArgs, CheckpointArgs, Cli, Command, CounterfactualArgs, Exit, ExplainArgs,
    GenWorldArgs, OutArgs, PopulationArgs, RunConfig, SweepArgs, TrainArgs, Which,
};
use crate::causal::{
    baseline_csv, Alignment, Context, Engine, Intervention, Population, ScoreReport,
};
use crate::classifiers::{
    train_attribute_classifier, AttributeClassifier, AttributeTrainConfig, TargetClassifier,
};
use crate::error::{check_dim, Error, Result};
use crate::numkit::OptimizerConfig;
use crate::persist;
use crate::shifter::{
    evaluate_efficacy, train_shift_predictor, write_loss_csv, Direction, LatentShift, LossRecord,
    OracleShift, ShiftPredictor, ShiftTrainConfig,
};
use crate::world::{pgm, World, WorldConfig};

pub const DEFAULT_POPULATION: usize = 200;
pub const DEFAULT_POPULATION_SEED: u64 = 2024;
pub const REFERENCE_BETA: [f64; 6] = [1.5, 1.0, -1.5, -1.0, 0.5, -0.5];
const DEFAULT_GAMMAS: [f64; 3] = [0.01, 0.1, 1.0];
const SWEEP_EVAL_SEED: u64 = 777;
const GRID_SAMPLES: usize = 5;
const LOSS_WINDOW: usize = 100;

pub(super) fn dispatch(cli: Cli) -> Result<Exit> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::GenWorld(a) => gen_world(&cfg, &a),
        Command::Train(a) => match a.which {
            Which::Attributes => train_attributes(&cfg, &a),
            Which::Shifter => train_shifter(&cfg, &a),
        },
        Command::Explain(a) => explain(&cfg, &a),
        Command::Baseline(a) => baseline(&cfg, &a),
        Command::Counterfactual(a) => counterfactual(&cfg, &a),
        Command::SweepGamma(a) => sweep_gamma(&cfg, &a),
    }
}

fn out_dir(flag: &OutArgs, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = flag
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn existing(path: PathBuf, what: &str, hint: &str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::invalid(format!(
            "{what} checkpoint {} not found; {hint}",
            path.display()
        )))
    }
}

fn world_path(ck: &CheckpointArgs, cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let path = ck
        .world
        .clone()
        .or_else(|| cfg.world.clone())
        .unwrap_or_else(|| out.join("world.json"));
    existing(
        path,
        "world",
        "run `cflens gen-world` first or pass --world",
    )
}

/// Checkpoints shared by the explanation commands, cross-checked for
/// matching dimensions before anything is computed.
struct Models {
    world: World,
    attributes: AttributeClassifier,
    shifter: Option<ShiftPredictor>,
}

impl Models {
    fn load(ck: &CheckpointArgs, cfg: &RunConfig, out: &Path, need_shifter: bool) -> Result<Self> {
        let world = World::load(&world_path(ck, cfg, out)?)?;
        let attributes_path = existing(
            ck.attributes
                .clone()
                .or_else(|| cfg.attributes.clone())
                .unwrap_or_else(|| out.join("attributes.json")),
            "attribute classifier",
            "run `cflens train attributes` first or pass --attributes",
        )?;
        let attributes = AttributeClassifier::load(&attributes_path)?;
        check_dim("attribute classifier input (n)", world.n(), attributes.n())?;
        check_dim("attribute classifier output (m)", world.m(), attributes.m())?;
        let shifter = if need_shifter {
            let path = existing(
                ck.shifter
                    .clone()
                    .or_else(|| cfg.shifter.clone())
                    .unwrap_or_else(|| out.join("shifter.json")),
                "shift predictor",
                "run `cflens train shifter` first, pass --shifter, or use --oracle-shifts",
            )?;
            let shifter = ShiftPredictor::load(&path)?;
            check_dim("shift predictor latent size (d)", world.d(), shifter.d())?;
            check_dim(
                "shift predictor attribute count (m)",
                world.m(),
                shifter.m(),
            )?;
            Some(shifter)
        } else {
            None
        };
        Ok(Self {
            world,
            attributes,
            shifter,
        })
    }

    fn shift<'a>(&'a self, oracle: &'a OracleShift<'a>) -> &'a dyn LatentShift {
        match &self.shifter {
            Some(s) => s,
            None => oracle,
        }
    }
}

fn load_target(flag: &Option<PathBuf>, cfg: &RunConfig, out: &Path) -> Result<TargetClassifier> {
    let path = existing(
        flag.clone()
            .or_else(|| cfg.target.clone())
            .unwrap_or_else(|| out.join("target.json")),
        "target classifier",
        "pass --target with a cflens-logistic-v1 or cflens-net-v1 file",
    )?;
    TargetClassifier::load(&path)
}

fn gen_world(cfg: &RunConfig, a: &GenWorldArgs) -> Result<Exit> {
    if a.samples == 0 {
        return Err(Error::invalid("--samples must be at least 1"));
    }
    let out = out_dir(&a.out, cfg)?;
    let world_cfg = WorldConfig {
        margin: a.margin,
        ..WorldConfig::new(a.d, a.m, a.n, a.seed)
    };
    let world = World::generate(&world_cfg)?;
    let path = out.join("world.json");
    world.save(&path)?;

    let mut counts = vec![0usize; world.m()];
    for z in world.sample_latents(a.seed, a.samples)? {
        for (c, on) in counts.iter_mut().zip(world.true_attributes(&z)?) {
            *c += usize::from(on);
        }
    }
    println!("wrote {}", path.display());
    println!("attribute  frequency");
    for (i, c) in counts.iter().enumerate() {
        println!("attr{i:<6} {:.4}", *c as f64 / a.samples as f64);
    }
    Ok(Exit::Success)
}

fn train_attributes(cfg: &RunConfig, a: &TrainArgs) -> Result<Exit> {
    let out = out_dir(&a.out, cfg)?;
    let world = World::load(&world_path(&a.checkpoints, cfg, &out)?)?;
    let mut tc = AttributeTrainConfig::default();
    if let Some(seed) = a.seed.or(cfg.seed) {
        tc.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        tc.epochs = epochs;
    }
    if let Some(b) = a.batch_size {
        tc.batch_size = b;
    }
    if let Some(lr) = a.lr {
        tc.optimizer = OptimizerConfig::adam(lr);
    }
    let training = train_attribute_classifier(&world, &tc)?;
    let path = out.join("attributes.json");
    training.classifier.save(&path)?;
    let mut csv = String::from("epoch,loss\n");
    for (epoch, loss) in training.epoch_loss.iter().enumerate() {
        let _ = writeln!(csv, "{epoch},{loss}");
    }
    persist::write_text(&out.join("attributes_loss.csv"), &csv)?;

    println!("wrote {}", path.display());
    println!("attribute  held-out accuracy");
    for (i, acc) in training.classifier.accuracy().iter().enumerate() {
        println!("attr{i:<6} {acc:.4}");
    }
    println!("mean       {:.4}", training.classifier.mean_accuracy());
    Ok(Exit::Success)
}

fn shift_config(cfg: &RunConfig, a: &TrainArgs) -> ShiftTrainConfig {
    let mut sc = ShiftTrainConfig::default();
    if let Some(seed) = a.seed.or(cfg.seed) {
        sc.seed = seed;
    }
    if let Some(g) = a.gamma.or(cfg.gamma) {
        sc.gamma = g;
    }
    if let Some(it) = a.iterations.or(cfg.iterations) {
        sc.iterations = it;
    }
    if let Some(b) = a.batch_size {
        sc.batch_size = b;
    }
    if let Some(p) = a.p_unset {
        sc.p_unset = p;
    }
    if let Some(lr) = a.lr {
        sc.optimizer = OptimizerConfig::adam(lr);
    }
    sc
}

fn window_means(history: &[LossRecord]) -> Option<(f64, f64)> {
    let w = history.len().min(LOSS_WINDOW);
    let tail = history.get(history.len() - w..).filter(|t| !t.is_empty())?;
    let mean = |f: fn(&LossRecord) -> f64| tail.iter().map(f).sum::<f64>() / w as f64;
    Some((mean(|r| r.loss_a), mean(|r| r.loss_f)))
}

fn train_shifter(cfg: &RunConfig, a: &TrainArgs) -> Result<Exit> {
    let out = out_dir(&a.out, cfg)?;
    let models = Models::load(&a.checkpoints, cfg, &out, false)?;
    let sc = shift_config(cfg, a);
    let training = train_shift_predictor(&sc, &models.world, &models.attributes)?;
    let path = out.join("shifter.json");
    training.predictor.save(&path)?;
    write_loss_csv(&out.join("loss.csv"), &training.history)?;

    println!("wrote {}", path.display());
    if let Some((la, lf)) = window_means(&training.history) {
        println!("final L_a {la:.4}, L_f {lf:.4} (mean of last {LOSS_WINDOW} iterations)");
    }
    Ok(Exit::Success)
}

fn report_exit(report: &ScoreReport) -> Exit {
    if report.has_undefined() {
        eprintln!("warning: report contains undefined scores (empty denominators)");
        Exit::Undefined
    } else {
        Exit::Success
    }
}

struct Explained {
    report: ScoreReport,
}

fn run_report(
    models: &Models,
    target: &TargetClassifier,
    oracle_shifts: bool,
    p: &PopulationArgs,
    cfg: &RunConfig,
    grids: Option<&Path>,
) -> Result<Explained> {
    let world = &models.world;
    let context = Context::parse(&p.context, world.m())?;
    let size = p
        .population
        .or(cfg.population)
        .unwrap_or(DEFAULT_POPULATION);
    let seed = p.seed.or(cfg.seed).unwrap_or(DEFAULT_POPULATION_SEED);
    let oracle = OracleShift(world);
    let shift = if oracle_shifts {
        &oracle
    } else {
        models.shift(&oracle)
    };
    let engine = Engine::new(world, shift, &models.attributes, target)?
        .condition_on_factual_attribute(p.condition_on_factual_attribute);
    let population = Population::sample(world, seed, size)?;
    let report = engine.contextual_scores(&population, &context)?;

    if let Some(dir) = grids {
        let samples = &population.latents[..population.len().min(GRID_SAMPLES)];
        for i in 0..world.m() {
            let mut rows = Vec::with_capacity(samples.len());
            for z in samples {
                let dec = engine
                    .counterfactual(z, &Intervention::single(world.m(), i, Direction::Decrease)?)?;
                let inc = engine
                    .counterfactual(z, &Intervention::single(world.m(), i, Direction::Increase)?)?;
                rows.push([dec.cf_image, dec.image, inc.cf_image]);
            }
            let cells: Vec<Vec<&[f64]>> = rows
                .iter()
                .map(|r| r.iter().map(|img| &img[..]).collect())
                .collect();
            let (pixels, w, h) = pgm::tile(&cells, world.n())?;
            pgm::write(&dir.join(format!("grid_attr{i}.pgm")), &pixels, w, h)?;
        }
    }
    Ok(Explained { report })
}

fn explain(cfg: &RunConfig, a: &ExplainArgs) -> Result<Exit> {
    let out = out_dir(&a.out, cfg)?;
    let models = Models::load(&a.checkpoints, cfg, &out, !a.checkpoints.oracle_shifts)?;
    let target = load_target(&a.target, cfg, &out)?;
    let Explained { report } = run_report(
        &models,
        &target,
        a.checkpoints.oracle_shifts,
        &a.population,
        cfg,
        Some(&out),
    )?;
    let csv = report.to_csv();
    persist::write_text(&out.join("scores.csv"), &csv)?;
    persist::write_text(&out.join("scores.json"), &(report.to_json()? + "\n"))?;
    print!("{csv}");
    Ok(report_exit(&report))
}

fn baseline(cfg: &RunConfig, a: &BaselineArgs) -> Result<Exit> {
    let out = out_dir(&a.out, cfg)?;
    let models = Models::load(&a.checkpoints, cfg, &out, !a.checkpoints.oracle_shifts)?;
    let m = models.world.m();
    let beta = match a.beta.clone().or_else(|| cfg.beta.clone()) {
        Some(beta) => beta,
        None if m == REFERENCE_BETA.len() => REFERENCE_BETA.to_vec(),
        None => {
            return Err(Error::invalid(format!(
                "the default coefficients cover 6 attributes but the world has {m}; pass --beta"
            )))
        }
    };
    check_dim("--beta", m, beta.len())?;
    let beta0 = a.beta0.or(cfg.beta0).unwrap_or(0.0);
    let target = TargetClassifier::logistic(beta.clone(), beta0)?;
    target.save(&out.join("target.json"))?;

    let Explained { report } = run_report(
        &models,
        &target,
        a.checkpoints.oracle_shifts,
        &a.population,
        cfg,
        None,
    )?;
    let alignment = Alignment::new(&beta, &report)?;
    let csv = baseline_csv(&alignment);
    persist::write_text(&out.join("baseline.csv"), &csv)?;
    print!("{csv}");
    Ok(report_exit(&report))
}

fn counterfactual(cfg: &RunConfig, a: &CounterfactualArgs) -> Result<Exit> {
    let out = out_dir(&a.out, cfg)?;
    let models = Models::load(&a.checkpoints, cfg, &out, !a.checkpoints.oracle_shifts)?;
    let iv = Intervention::parse(&a.intervention, models.world.m())?;
    let target = load_target(&a.target, cfg, &out)?;
    let oracle = OracleShift(&models.world);
    let shift = if a.checkpoints.oracle_shifts {
        &oracle
    } else {
        models.shift(&oracle)
    };
    let engine = Engine::new(&models.world, shift, &models.attributes, &target)?;
    let z = models.world.sample_latent(a.latent_seed, a.index);
    let record = engine.counterfactual(&z, &iv)?;
    persist::write_json(&out.join("record.json"), &record)?;
    pgm::write_image(&out.join("factual.pgm"), &record.image)?;
    pgm::write_image(&out.join("counterfactual.pgm"), &record.cf_image)?;

    println!("intervention {iv}");
    println!(
        "target       p={:.4} class={} -> p={:.4} class={}",
        record.target_before.probability,
        u8::from(record.target_before.class),
        record.target_after.probability,
        u8::from(record.target_after.class)
    );
    for (i, (b, f)) in record
        .attrs_before
        .iter()
        .zip(&record.attrs_after)
        .enumerate()
    {
        println!("attr{i:<8} {b:.4} -> {f:.4}");
    }
    Ok(Exit::Success)
}

fn sweep_gamma(cfg: &RunConfig, a: &SweepArgs) -> Result<Exit> {
    let out = out_dir(&a.out, cfg)?;
    let models = Models::load(&a.checkpoints, cfg, &out, false)?;
    let gammas = a
        .gammas
        .clone()
        .or_else(|| cfg.gammas.clone())
        .unwrap_or_else(|| DEFAULT_GAMMAS.to_vec());
    if gammas.is_empty() {
        return Err(Error::invalid("--gammas must list at least one value"));
    }
    let mut sc = ShiftTrainConfig::default();
    if let Some(seed) = a.seed.or(cfg.seed) {
        sc.seed = seed;
    }
    if let Some(it) = a.iterations.or(cfg.iterations) {
        sc.iterations = it;
    }
    let mut csv =
        String::from("gamma,loss_a,loss_f,min_flip_rate,mean_displacement,oracle_displacement\n");
    for gamma in gammas {
        let training = train_shift_predictor(
            &ShiftTrainConfig {
                gamma,
                ..sc.clone()
            },
            &models.world,
            &models.attributes,
        )?;
        let eff = evaluate_efficacy(
            &training.predictor,
            &models.world,
            &models.attributes,
            SWEEP_EVAL_SEED,
            a.eval_samples,
        )?;
        let (la, lf) = window_means(&training.history)
            .map_or((String::new(), String::new()), |(la, lf)| {
                (la.to_string(), lf.to_string())
            });
        let _ = writeln!(
            csv,
            "{gamma},{la},{lf},{},{},{}",
            eff.min_flip_rate(),
            eff.mean_displacement,
            eff.oracle_displacement
        );
    }
    persist::write_text(&out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(Exit::Success)
}
