use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use sugeno::capacity::{param_count, Capacity};
use sugeno::eval::{self, BenchmarkConfig, Dataset};
use sugeno::features::{read_directions, DirectionProbeConfig};
use sugeno::lp::export_lp_text;
use sugeno::rules::extract_rules;
use sugeno::theory;
use sugeno::trainer::{self, DirectionMode, PositiveIndexRule, ThresholdMode, TrainConfig};
use sugeno::{Error, SugenoModel};

#[derive(Parser, Debug)]
#[command(name = "sugeno", version, about = "Sugeno-integral classifiers with k-maxitive capacities")]
struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, env = "SUGENO_SEED", default_value_t = 0)]
    seed: u64,
    /// Structured output instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a classifier and write it as JSON.
    Fit(FitArgs),
    /// Score and classify the rows of a CSV file.
    Predict(PredictArgs),
    /// Print a model as a list of rules.
    Rules(RulesArgs),
    /// Repeated random train/test splits.
    Benchmark(BenchArgs),
    /// Check that threshold classifiers shatter the Sperner dataset.
    Shatter(ShatterArgs),
    /// Measure how far a low-order projection moves the integral.
    Stability(StabilityArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Label column (default: the last column).
    #[arg(long)]
    label: Option<String>,
    /// Label value of the positive class.
    #[arg(long, default_value = "1")]
    positive: String,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DirectionArg {
    AssumeIncreasing,
    Detect,
    File,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ThresholdArg {
    Surrogate,
    Reoptimize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PositiveIndexArg {
    Derived,
    Preceding,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Candidate orders k (default 1..m).
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Candidate margins.
    #[arg(long, value_delimiter = ',', default_values_t = trainer::DEFAULT_RHO_GRID)]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, value_enum, default_value = "assume-increasing")]
    direction_mode: DirectionArg,
    /// `name,+1|-1` per line; used with `--direction-mode file`.
    #[arg(long)]
    directions_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "surrogate")]
    threshold: ThresholdArg,
    /// Chain set constrained by positive examples.
    #[arg(long, value_enum, default_value = "derived")]
    positive_index: PositiveIndexArg,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Model output path.
    #[arg(long, short, default_value = "model.json")]
    out: PathBuf,
    /// Also write the final capacity LP in LP text format.
    #[arg(long)]
    export_lp: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Label column to compare against; it is ignored as a feature.
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value = "1")]
    positive: String,
    /// Write predictions here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RulesArgs {
    #[arg(long)]
    model: PathBuf,
    /// Show the raw-scale bound behind each utility condition.
    #[arg(long)]
    raw: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Training shares to evaluate.
    #[arg(long, value_delimiter = ',', default_values_t = [0.8])]
    fraction: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    splits: usize,
    /// Also train with k = m on every split.
    #[arg(long)]
    compare_full: bool,
    /// Worker threads for the splits.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct ShatterArgs {
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Labelings to sample when there are more than this many.
    #[arg(long, default_value_t = 1000)]
    samples: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BuiltinCapacity {
    Cardinality,
    MaxMeasure,
    MinMeasure,
    Random,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    /// Take the capacity from a model file.
    #[arg(long, conflicts_with_all = ["capacity", "builtin"])]
    model: Option<PathBuf>,
    /// Capacity JSON file (`m`, `k`, `entries`).
    #[arg(long, conflicts_with = "builtin")]
    capacity: Option<PathBuf>,
    #[arg(long, value_enum)]
    builtin: Option<BuiltinCapacity>,
    /// Ground set size for built-in capacities.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Utility grid spacing.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
}

struct Usage(String);

impl std::fmt::Debug for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidOrder { .. }) => 1,
        Some(Error::Lp { .. } | Error::IterationLimit(_)) => 3,
        Some(_) => 2,
        None if err.downcast_ref::<io::Error>().is_some() => 2,
        None => 3,
    }
}

fn train_config(args: &TrainArgs, seed: u64, names: &[String]) -> anyhow::Result<TrainConfig> {
    let directions = match args.direction_mode {
        DirectionArg::AssumeIncreasing => DirectionMode::AssumeIncreasing,
        DirectionArg::Detect => DirectionMode::Detect(DirectionProbeConfig {
            seed,
            ..DirectionProbeConfig::default()
        }),
        DirectionArg::File => {
            let path = args
                .directions_file
                .as_ref()
                .ok_or_else(|| usage("--direction-mode file needs --directions-file"))?;
            DirectionMode::Given(read_directions(path, names)?)
        }
    };
    Ok(TrainConfig {
        k_grid: args.k.clone(),
        rho_grid: args.rho.clone(),
        folds: args.folds,
        seed,
        directions,
        threshold: match args.threshold {
            ThresholdArg::Surrogate => ThresholdMode::Surrogate,
            ThresholdArg::Reoptimize => ThresholdMode::SurrogateThenReoptimize,
        },
        positive_index: match args.positive_index {
            PositiveIndexArg::Derived => PositiveIndexRule::Derived,
            PositiveIndexArg::Preceding => PositiveIndexRule::Preceding,
        },
    })
}

fn load(args: &DataArgs) -> anyhow::Result<Dataset> {
    let d = eval::load_csv(&args.data, args.label.as_deref(), &args.positive)?;
    log::info!("{}: {} instances, {} features, {} positive", args.data.display(), d.n(), d.m(), d.positives());
    Ok(d)
}

fn emit(out: &mut dyn Write, text: &str) -> anyhow::Result<()> {
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn cmd_fit(cli: &Cli, args: &FitArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let data = load(&args.data)?;
    let cfg = train_config(&args.train, cli.seed, &data.feature_names)?;
    let fitted = trainer::fit(&data, &cfg)?;
    let model = &fitted.model;
    model
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.export_lp {
        fs::write(path, export_lp_text(&fitted.program.lp))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let meta = &model.meta;
    if cli.json {
        let summary = json!({
            "model": args.out,
            "k": meta.k,
            "rho": meta.rho,
            "beta": model.beta,
            "surrogate_beta": meta.surrogate_beta,
            "training_loss": meta.training_loss,
            "lp_objective": meta.lp_objective,
            "cv": meta.cv,
        });
        return emit(out, &serde_json::to_string_pretty(&summary)?);
    }
    let mut s = format!(
        "k = {}, rho = {}, beta = {:.4}, training loss = {:.4}\n",
        meta.k, meta.rho, model.beta, meta.training_loss
    );
    if !meta.cv.is_empty() {
        s.push_str("cross-validation:\n");
        for r in &meta.cv {
            s.push_str(&format!("  k = {:<2} rho = {:<5} loss = {:.4}\n", r.k, r.rho, r.loss));
        }
    }
    s.push_str(&format!("model written to {}\n", args.out.display()));
    emit(out, &s)
}

fn cmd_predict(cli: &Cli, args: &PredictArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let model = SugenoModel::load(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let table = eval::read_table(&args.data, args.label.as_deref())?;
    let order = model.column_order(&table.names)?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for raw in &table.rows {
        let row: Vec<f64> = order.iter().map(|&j| raw[j]).collect();
        let score = model.score(&row)?;
        rows.push((score, score >= model.beta));
    }
    let loss = table.excluded.as_ref().map(|labels| {
        let truth: Vec<bool> = labels.iter().map(|l| *l == args.positive).collect();
        let pred: Vec<bool> = rows.iter().map(|r| r.1).collect();
        eval::zero_one_loss(&pred, &truth)
    });

    let body = if cli.json {
        let items: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, (s, p))| json!({"row": i + 1, "score": s, "positive": p}))
            .collect();
        serde_json::to_string_pretty(&json!({"predictions": items, "loss": loss}))?
    } else {
        let mut s = String::from("row,score,prediction\n");
        for (i, (score, p)) in rows.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", i + 1, score, u8::from(*p)));
        }
        s
    };
    match &args.out {
        Some(path) => {
            fs::write(path, &body).with_context(|| format!("writing {}", path.display()))?;
            if let Some(l) = loss {
                if !cli.json {
                    emit(out, &format!("0/1 loss {l:.4}"))?;
                }
            }
            Ok(())
        }
        None => {
            emit(out, &body)?;
            if let (Some(l), false) = (loss, cli.json) {
                log::info!("0/1 loss {l:.4}");
            }
            Ok(())
        }
    }
}

fn cmd_rules(cli: &Cli, args: &RulesArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let model = SugenoModel::load(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let transforms = args.raw.then_some(model.transforms.as_slice());
    let set = extract_rules(&model.capacity, model.beta, &model.feature_names, transforms);
    if set.rules.is_empty() {
        log::warn!("classifier is constant negative");
    }
    if cli.json {
        emit(out, &set.to_json())
    } else {
        emit(out, &format!("beta = {}\n{}", model.beta, set.to_text()))
    }
}

fn cmd_benchmark(cli: &Cli, args: &BenchArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if args.splits == 0 {
        bail!(usage("--splits must be at least 1"));
    }
    let data = load(&args.data)?;
    let train = train_config(&args.train, cli.seed, &data.feature_names)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    let mut reports = Vec::new();
    for &fraction in &args.fraction {
        let cfg = BenchmarkConfig {
            splits: args.splits,
            train_fraction: fraction,
            seed: cli.seed,
            train: train.clone(),
            compare_full: args.compare_full,
        };
        eval::split(data.n(), fraction, cli.seed)?;
        let splits = pool.install(|| {
            (0..cfg.splits)
                .into_par_iter()
                .map(|i| eval::run_split(&data, &cfg, i))
                .collect::<Vec<_>>()
        });
        let report = eval::summarize_splits(&data, &cfg, splits);
        if report.loss.is_none() {
            return Err(Error::Data(format!("every split failed at fraction {fraction}")).into());
        }
        reports.push(report);
    }
    if cli.json {
        emit(out, &serde_json::to_string_pretty(&reports)?)
    } else {
        let text: Vec<String> = reports.iter().map(|r| r.to_text()).collect();
        emit(out, &text.join("\n"))
    }
}

fn cmd_shatter(cli: &Cli, args: &ShatterArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let r = theory::shatter_demo(args.m, args.samples, &mut rng)?;
    if cli.json {
        emit(out, &serde_json::to_string_pretty(&r)?)
    } else {
        emit(
            out,
            &format!(
                "m = {}: {} instances, {} of {} {} labelings realized at beta = 1/2",
                r.m,
                r.instances,
                r.realized,
                r.labelings_checked,
                if r.exhaustive { "(all)" } else { "sampled" }
            ),
        )
    }
}

fn cmd_stability(cli: &Cli, args: &StabilityArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let mu = if let Some(path) = &args.model {
        SugenoModel::load(path)?.capacity
    } else if let Some(path) = &args.capacity {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str::<Capacity>(&text).map_err(Error::from)?
    } else {
        let m = args.m;
        match args.builtin.ok_or_else(|| usage("give one of --model, --capacity or --builtin"))? {
            BuiltinCapacity::Cardinality => Capacity::cardinality(m)?,
            BuiltinCapacity::MaxMeasure => Capacity::max_measure(m)?,
            BuiltinCapacity::MinMeasure => Capacity::min_measure(m)?,
            BuiltinCapacity::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                sugeno::random::monotone_capacity(&mut rng, m, m, true)?
            }
        }
    };
    if !mu.is_monotone() {
        log::warn!("capacity is not monotone");
    }
    let r = theory::stability_check(&mu, args.eps, args.step)?;
    let full = mu.to_full();
    let projected = full.truncate(r.k_star)?;
    let stored = param_count(mu.m(), r.k_star);
    let all_sets = (1usize << mu.m()) - 1;
    let projection_error = full.maxitivity_gap(r.k_star);
    if cli.json {
        let mut v = serde_json::to_value(&r)?;
        v["m"] = json!(mu.m());
        v["holds"] = json!(r.holds());
        v["projected"] = json!({
            "k": projected.k(),
            "stored_sets": stored,
            "all_sets": all_sets,
            "projection_error": projection_error,
        });
        return emit(out, &serde_json::to_string_pretty(&v)?);
    }
    emit(
        out,
        &format!(
            "eps = {}, k* = {} of m = {}\n\
             projection stores {} of {} sets, projection error {:.6}\n\
             gap over {} grid points: min {:.6}, max {:.6} ({})",
            r.eps,
            r.k_star,
            mu.m(),
            stored,
            all_sets,
            projection_error,
            r.grid_points,
            r.min_gap,
            r.max_gap,
            if r.holds() { "within bound" } else { "BOUND VIOLATED" }
        ),
    )
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Fit(a) => cmd_fit(cli, a, &mut out),
        Command::Predict(a) => cmd_predict(cli, a, &mut out),
        Command::Rules(a) => cmd_rules(cli, a, &mut out),
        Command::Benchmark(a) => cmd_benchmark(cli, a, &mut out),
        Command::Shatter(a) => cmd_shatter(cli, a, &mut out),
        Command::Stability(a) => cmd_stability(cli, a, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Command::Fit(FitArgs { data, .. }) | Command::Benchmark(BenchArgs { data, .. }) = &cli.command {
        if !data.data.exists() {
            eprintln!("error: data file {} does not exist", data.data.display());
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
