//! `tm` — Tsetlin Machine inference toolkit.
//!
//! Subcommands: booleanize, train, reorder, infer, bench, inspect.
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 internal
//! invariant violation (engine disagreement).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tm_core::bench::{inspect, run_bench, BenchConfig};
use tm_core::booleanize::{booleanize_dataset, ingest_csv, ingest_idx, RawDataset, Thermometer};
use tm_core::engines::{EngineKind, Evaluator};
use tm_core::io::{read_dataset_file, read_model_file, write_dataset_file, write_model_file};
use tm_core::reorder::reorder_pipeline;
use tm_core::trainer::{train, TrainerConfig, RNG_ALGORITHM};
use tm_core::TmError;

#[derive(Parser)]
#[command(name = "tm", version, about = "Tsetlin Machine inference toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw dataset (CSV or IDX images) into a packed literal file.
    Booleanize(BooleanizeArgs),
    /// Train a model on a booleanized dataset.
    Train(TrainArgs),
    /// Build the literal reorder permutation and apply it to a model.
    Reorder(ReorderArgs),
    /// Run one engine over a dataset and write a JSON report.
    Infer(InferArgs),
    /// Time engines against each other and write a JSON report.
    Bench(BenchArgs),
    /// Print shape and include statistics of a model.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Csv,
    Idx,
}

#[derive(Args)]
struct BooleanizeArgs {
    /// CSV file, or IDX image file for --format idx.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: InputFormat,
    /// IDX label file (required with --format idx).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// CSV label column (0-based; default: last column).
    #[arg(long)]
    label_col: Option<usize>,
    /// Thermometer bins per feature. Default: 12 for csv, binary
    /// nonzero-median thresholding for idx.
    #[arg(long)]
    bins: Option<usize>,
    /// Binarize with one global threshold: the median nonzero value.
    #[arg(long, default_value_t = false)]
    binary_median: bool,
    /// Take permutation (and thermometer, when stored) from this model so
    /// the emitted literals match its layout.
    #[arg(long)]
    permutation_from: Option<PathBuf>,
    /// Write the fitted thermometer as JSON (to embed at training time).
    #[arg(long)]
    thermometer_out: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Clauses per class.
    #[arg(long)]
    clauses: usize,
    /// Voting target T.
    #[arg(long = "T")]
    threshold: u32,
    /// Specificity s.
    #[arg(long = "s")]
    specificity: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n_states: u16,
    /// Thermometer JSON to embed into the model file.
    #[arg(long)]
    thermometer: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ReorderArgs {
    #[arg(long)]
    model: PathBuf,
    /// Unpermuted calibration dataset (typically the training set).
    #[arg(long)]
    calibration: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Write p_zero / p_include / product / order as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    engine: EngineArg,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include per-sample class sums in the report.
    #[arg(long, default_value_t = false)]
    verbose: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Engines to time (comma-separated, or "all").
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    engines: Vec<EngineArg>,
    #[arg(long, default_value_t = 9)]
    repeats: usize,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    /// Also benchmark the reordered pipeline and report its overhead.
    #[arg(long, default_value_t = false)]
    with_reorder: bool,
    /// Calibration dataset for --with-reorder (default: --data).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Time the sample-parallel path instead of the serial one.
    #[arg(long, default_value_t = false)]
    parallel: bool,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = false)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    All,
    Baseline,
    EarlyExit,
    Bitwise,
    BitwiseEe,
}

fn resolve_engines(args: &[EngineArg]) -> Vec<EngineKind> {
    if args.iter().any(|e| *e == EngineArg::All) {
        return EngineKind::ALL.to_vec();
    }
    let mut out = Vec::new();
    for e in args {
        let kind = match e {
            EngineArg::Baseline => EngineKind::Baseline,
            EngineArg::EarlyExit => EngineKind::EarlyExit,
            EngineArg::Bitwise => EngineKind::Bitwise,
            EngineArg::BitwiseEe => EngineKind::BitwiseEarlyExit,
            EngineArg::All => unreachable!(),
        };
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                TmError::EngineDisagreement { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), TmError> {
    match cli.command {
        Command::Booleanize(args) => booleanize_cmd(args),
        Command::Train(args) => train_cmd(args),
        Command::Reorder(args) => reorder_cmd(args),
        Command::Infer(args) => infer_cmd(args),
        Command::Bench(args) => bench_cmd(args),
        Command::Inspect(args) => inspect_cmd(args),
    }
}

fn booleanize_cmd(args: BooleanizeArgs) -> Result<(), TmError> {
    let raw: RawDataset = match args.format {
        InputFormat::Csv => ingest_csv(&args.input, args.label_col)?,
        InputFormat::Idx => {
            let labels = args.labels.as_ref().ok_or_else(|| {
                TmError::InvalidConfig("--format idx requires --labels".into())
            })?;
            ingest_idx(&args.input, labels)?
        }
    };

    let stored_model = match &args.permutation_from {
        Some(path) => Some(read_model_file(path)?),
        None => None,
    };

    let thermometer = match stored_model.as_ref().and_then(|m| m.thermometer()) {
        Some(th) => th.clone(),
        None => match (args.bins, args.binary_median, args.format) {
            (Some(_), true, _) => {
                return Err(TmError::InvalidConfig(
                    "--bins and --binary-median are mutually exclusive".into(),
                ))
            }
            (Some(bins), false, _) => Thermometer::fit(&raw, bins)?,
            (None, true, _) | (None, false, InputFormat::Idx) => {
                Thermometer::fit_binary_nonzero_median(&raw)?
            }
            (None, false, InputFormat::Csv) => Thermometer::fit(&raw, 12)?,
        },
    };

    let permutation = stored_model.as_ref().and_then(|m| m.permutation());
    let data = booleanize_dataset(&raw, &thermometer, permutation)?;
    write_dataset_file(&data, &args.output)?;

    if let Some(path) = &args.thermometer_out {
        let json = serde_json::to_string_pretty(&thermometer)
            .map_err(|e| TmError::InvalidConfig(e.to_string()))?;
        std::fs::write(path, json)?;
    }
    println!(
        "wrote {} samples x {} literals to {}",
        data.n_samples(),
        data.n_literals(),
        args.output.display()
    );
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<(), TmError> {
    let data = read_dataset_file(&args.data)?;
    let cfg = TrainerConfig {
        clauses_per_class: args.clauses,
        threshold: args.threshold,
        specificity: args.specificity,
        epochs: args.epochs,
        n_states: args.n_states,
        seed: args.seed,
    };
    let mut model = train(&data, &cfg)?;
    if let Some(path) = &args.thermometer {
        let json = std::fs::read_to_string(path)?;
        let th: Thermometer =
            serde_json::from_str(&json).map_err(|e| TmError::Shape(e.to_string()))?;
        model.set_thermometer(th);
    }
    write_model_file(&model, &args.output)?;
    let shape = model.shape();
    println!(
        "trained {} classes x {} clauses x {} literals (seed {}, rng {RNG_ALGORITHM}) -> {}",
        shape.n_classes,
        shape.clauses_per_class,
        shape.n_literals(),
        args.seed,
        args.output.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ReorderStatsReport<'a> {
    p_zero: &'a [f64],
    p_include: &'a [f64],
    product: &'a [f64],
    order: &'a [u32],
}

fn reorder_cmd(args: ReorderArgs) -> Result<(), TmError> {
    let model = read_model_file(&args.model)?;
    let calibration = read_dataset_file(&args.calibration)?;
    let (reordered, perm) = reorder_pipeline(&model, &calibration)?;
    write_model_file(&reordered, &args.output)?;

    if let Some(path) = &args.stats {
        let stats = perm.stats().expect("pipeline permutation carries stats");
        let report = ReorderStatsReport {
            p_zero: &stats.p_zero,
            p_include: &stats.p_include,
            product: &stats.product,
            order: perm.order(),
        };
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| TmError::InvalidConfig(e.to_string()))?;
        std::fs::write(path, json)?;
    }
    println!(
        "reordered model written to {} (fingerprint {:016x})",
        args.output.display(),
        perm.fingerprint()
    );
    Ok(())
}

#[derive(Serialize)]
struct InferReport {
    engine: EngineKind,
    n_samples: usize,
    accuracy: Option<f64>,
    total_wall_ns: u64,
    mean_words_examined_per_clause: f64,
    mean_literals_examined_per_clause: f64,
    early_exit_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_sums: Option<Vec<Vec<i32>>>,
}

fn infer_cmd(args: InferArgs) -> Result<(), TmError> {
    let model = read_model_file(&args.model)?;
    let data = read_dataset_file(&args.data)?;
    let engine = resolve_engines(&[args.engine])[0];
    let batch = Evaluator::new(&model, engine).predict_batch(&data)?;

    let mut counters = tm_core::engines::WorkCounters::default();
    let mut total_wall_ns = 0u64;
    for r in &batch.reports {
        counters.add(&r.counters);
        total_wall_ns += r.wall_time_ns;
    }
    let clauses = counters.clauses_evaluated.max(1) as f64;
    let report = InferReport {
        engine,
        n_samples: data.n_samples(),
        accuracy: batch.accuracy,
        total_wall_ns,
        mean_words_examined_per_clause: counters.words_examined as f64 / clauses,
        mean_literals_examined_per_clause: counters.literals_examined as f64 / clauses,
        early_exit_rate: counters.early_exits_taken as f64 / clauses,
        class_sums: if args.verbose {
            Some(batch.reports.iter().map(|r| r.class_sums.clone()).collect())
        } else {
            None
        },
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| TmError::InvalidConfig(e.to_string()))?;
    match &args.report {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> Result<(), TmError> {
    let model = read_model_file(&args.model)?;
    let data = read_dataset_file(&args.data)?;
    let calibration = match &args.calibration {
        Some(path) => Some(read_dataset_file(path)?),
        None => None,
    };
    let cfg = BenchConfig {
        engines: resolve_engines(&args.engines),
        repeats: args.repeats,
        warmup: args.warmup,
        with_reorder: args.with_reorder,
        parallel: args.parallel,
    };
    let report = run_bench(&model, &data, calibration.as_ref(), &cfg)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| TmError::InvalidConfig(e.to_string()))?;
    match &args.report {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn inspect_cmd(args: InspectArgs) -> Result<(), TmError> {
    let model = read_model_file(&args.model)?;
    let summary = inspect(&model);
    if args.json {
        let json = serde_json::to_string_pretty(&summary)
            .map_err(|e| TmError::InvalidConfig(e.to_string()))?;
        println!("{json}");
    } else {
        println!("{summary}");
    }
    Ok(())
}
