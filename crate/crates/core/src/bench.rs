//! Benchmark harness: times whole-dataset passes per engine and reports
//! speedup ratios plus the architecture-independent work counters.
//!
//! Wall times on desk hardware carry noise, so the methodology is:
//! monotonic clock, whole-dataset pass granularity, warmup passes
//! excluded, median of the repeat passes reported. Counters (words and
//! literals examined) are deterministic and serve as the primary
//! evidence; wall time is secondary.
//!
//! Before any timing, all enabled engines must agree on every prediction
//! and class sum — a disagreement aborts the run, it is never a result.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engines::{EngineKind, Evaluator, PassOutcome, PreparedData, WorkCounters};
use crate::error::{Result, TmError};
use crate::io::{dataset_to_bytes, fingerprint_bytes, model_to_bytes};
use crate::model::{ActionModel, BoolDataset};
use crate::reorder;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub engines: Vec<EngineKind>,
    pub repeats: usize,
    pub warmup: usize,
    /// Also benchmark the reordered model/dataset pair (derived
    /// internally) and report the reorder overhead.
    pub with_reorder: bool,
    /// Time the sample-parallel path instead of the serial one.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            engines: EngineKind::ALL.to_vec(),
            repeats: 9,
            warmup: 3,
            with_reorder: false,
            parallel: false,
        }
    }
}

/// One engine x layout measurement.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EngineRow {
    pub engine: EngineKind,
    pub reordered: bool,
    /// Median whole-dataset pass time.
    pub total_wall_ns: u64,
    pub mean_ns_per_sample: f64,
    pub median_ns_per_sample: f64,
    /// Raw pass times, one per repeat.
    pub pass_ns: Vec<u64>,
    pub mean_words_examined_per_clause: f64,
    pub mean_literals_examined_per_clause: f64,
    pub early_exit_rate: f64,
    /// `100 * (1 - t / t_baseline)` against the unreordered Baseline row;
    /// absent when Baseline is not among the benchmarked engines.
    pub time_reduction_percent_vs_baseline: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_samples: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub parallel: bool,
    pub model_fingerprint: String,
    pub dataset_fingerprint: String,
    pub rows: Vec<EngineRow>,
    /// Statistics + permutation build + model gather time, present when
    /// reordering was benchmarked. Dataset permutation is not counted: in
    /// a deployed pipeline the reordered layout comes out of
    /// booleanization directly, at no extra cost.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reorder_overhead_ns: Option<u64>,
}

impl BenchReport {
    pub fn row(&self, engine: EngineKind, reordered: bool) -> Option<&EngineRow> {
        self.rows
            .iter()
            .find(|r| r.engine == engine && r.reordered == reordered)
    }
}

/// Runs the configured engines over the dataset and times them.
///
/// For the reordered rows a calibration set is needed to build the
/// permutation; it defaults to the benchmarked dataset itself.
pub fn run_bench(
    model: &ActionModel,
    dataset: &BoolDataset,
    calibration: Option<&BoolDataset>,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if cfg.engines.is_empty() {
        return Err(TmError::InvalidConfig("no engines selected".into()));
    }
    if cfg.repeats == 0 {
        return Err(TmError::InvalidConfig("repeats must be >= 1".into()));
    }
    dataset.validate_pairing(model)?;
    if dataset.n_samples() == 0 {
        return Err(TmError::EmptyDataset);
    }

    let mut report = BenchReport {
        n_samples: dataset.n_samples(),
        repeats: cfg.repeats,
        warmup: cfg.warmup,
        parallel: cfg.parallel,
        model_fingerprint: format!("{:016x}", fingerprint_bytes(&model_to_bytes(model))),
        dataset_fingerprint: format!("{:016x}", fingerprint_bytes(&dataset_to_bytes(dataset))),
        rows: Vec::new(),
        reorder_overhead_ns: None,
    };

    let reference = agreement_reference(model, dataset, &cfg.engines)?;
    bench_rows(model, dataset, cfg, false, &mut report.rows)?;

    if cfg.with_reorder {
        let calibration = calibration.unwrap_or(dataset);
        let start = Instant::now();
        let (reordered_model, perm) = reorder::reorder_pipeline(model, calibration)?;
        let overhead = start.elapsed().as_nanos() as u64;
        report.reorder_overhead_ns = Some(overhead);

        let permuted = reorder::apply_permutation_dataset(dataset, &perm)?;
        let permuted_reference =
            agreement_reference(&reordered_model, &permuted, &cfg.engines)?;
        if permuted_reference != reference {
            let sample = reference
                .iter()
                .zip(&permuted_reference)
                .position(|(a, b)| a != b)
                .unwrap_or(0);
            return Err(TmError::EngineDisagreement {
                sample,
                details: "reordered pipeline diverged from the unreordered one".into(),
            });
        }
        bench_rows(&reordered_model, &permuted, cfg, true, &mut report.rows)?;
    }

    let baseline_ns = report
        .row(EngineKind::Baseline, false)
        .map(|r| r.total_wall_ns);
    if let Some(base) = baseline_ns {
        for row in &mut report.rows {
            row.time_reduction_percent_vs_baseline =
                Some(100.0 * (1.0 - row.total_wall_ns as f64 / base as f64));
        }
    }
    Ok(report)
}

/// Per-sample (prediction, class sums) from the first engine, after
/// checking every other engine produces exactly the same.
fn agreement_reference(
    model: &ActionModel,
    dataset: &BoolDataset,
    engines: &[EngineKind],
) -> Result<Vec<(u32, Vec<i32>)>> {
    let mut reference: Option<(EngineKind, Vec<(u32, Vec<i32>)>)> = None;
    for &engine in engines {
        let batch = Evaluator::new(model, engine).predict_batch(dataset)?;
        let outcomes: Vec<(u32, Vec<i32>)> = batch
            .reports
            .into_iter()
            .map(|r| (r.predicted_class, r.class_sums))
            .collect();
        match &reference {
            None => reference = Some((engine, outcomes)),
            Some((ref_engine, ref_outcomes)) => {
                if let Some(sample) =
                    ref_outcomes.iter().zip(&outcomes).position(|(a, b)| a != b)
                {
                    return Err(TmError::EngineDisagreement {
                        sample,
                        details: format!(
                            "{ref_engine} produced {:?}, {engine} produced {:?}",
                            ref_outcomes[sample], outcomes[sample]
                        ),
                    });
                }
            }
        }
    }
    Ok(reference.expect("engines is nonempty").1)
}

fn bench_rows(
    model: &ActionModel,
    dataset: &BoolDataset,
    cfg: &BenchConfig,
    reordered: bool,
    rows: &mut Vec<EngineRow>,
) -> Result<()> {
    for &engine in &cfg.engines {
        let evaluator = Evaluator::new(model, engine);
        let prepared = evaluator.prepare(dataset)?;
        rows.push(bench_engine(&evaluator, &prepared, cfg, reordered));
    }
    Ok(())
}

fn bench_engine(
    evaluator: &Evaluator,
    prepared: &PreparedData,
    cfg: &BenchConfig,
    reordered: bool,
) -> EngineRow {
    let run = |outcome: &mut Option<PassOutcome>| -> u64 {
        let start = Instant::now();
        let out = if cfg.parallel {
            evaluator.pass_parallel(prepared)
        } else {
            evaluator.pass(prepared)
        };
        let ns = start.elapsed().as_nanos() as u64;
        std::hint::black_box(out.prediction_checksum);
        *outcome = Some(out);
        ns
    };

    let mut outcome = None;
    for _ in 0..cfg.warmup {
        run(&mut outcome);
    }
    let mut pass_ns = Vec::with_capacity(cfg.repeats);
    let mut counters = WorkCounters::default();
    for r in 0..cfg.repeats {
        let ns = run(&mut outcome);
        pass_ns.push(ns);
        let out = outcome.as_ref().unwrap();
        if r == 0 {
            counters = out.counters;
        } else {
            debug_assert_eq!(counters, out.counters);
        }
    }

    let n = prepared.n_samples() as f64;
    let median = median_ns(&pass_ns);
    let mean = pass_ns.iter().sum::<u64>() as f64 / pass_ns.len() as f64;
    let clauses = counters.clauses_evaluated.max(1) as f64;
    EngineRow {
        engine: evaluator.engine(),
        reordered,
        total_wall_ns: median,
        mean_ns_per_sample: mean / n,
        median_ns_per_sample: median as f64 / n,
        pass_ns,
        mean_words_examined_per_clause: counters.words_examined as f64 / clauses,
        mean_literals_examined_per_clause: counters.literals_examined as f64 / clauses,
        early_exit_rate: counters.early_exits_taken as f64 / clauses,
        time_reduction_percent_vs_baseline: None,
    }
}

fn median_ns(samples: &[u64]) -> u64 {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2
    }
}

/// Shape, include statistics and flags of a model, for the `inspect`
/// command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSummary {
    pub n_classes: usize,
    pub clauses_per_class: usize,
    pub n_bool_features: usize,
    pub n_literals: usize,
    pub words_per_row: usize,
    pub permuted: bool,
    pub has_thermometer: bool,
    /// Total include bits over each class's clause rows.
    pub includes_per_class: Vec<u64>,
    pub mean_p_include: f64,
    /// `P(include)` per literal position, bucketed into 10 bins over
    /// `[0, 1]`.
    pub p_include_histogram: [u64; 10],
}

pub fn inspect(model: &ActionModel) -> ModelSummary {
    let shape = model.shape();
    let mut includes_per_class = vec![0u64; shape.n_classes];
    for class in 0..shape.n_classes {
        for clause in 0..shape.clauses_per_class {
            includes_per_class[class] += model.action_row(class, clause).count_ones() as u64;
        }
    }
    let p_include = reorder::include_prob(model);
    let mean_p_include = if p_include.is_empty() {
        0.0
    } else {
        p_include.iter().sum::<f64>() / p_include.len() as f64
    };
    let mut p_include_histogram = [0u64; 10];
    for &p in &p_include {
        let bin = ((p * 10.0) as usize).min(9);
        p_include_histogram[bin] += 1;
    }
    ModelSummary {
        n_classes: shape.n_classes,
        clauses_per_class: shape.clauses_per_class,
        n_bool_features: shape.n_bool_features,
        n_literals: shape.n_literals(),
        words_per_row: shape.words_per_row(),
        permuted: model.permutation().is_some(),
        has_thermometer: model.thermometer().is_some(),
        includes_per_class,
        mean_p_include,
        p_include_histogram,
    }
}

impl std::fmt::Display for ModelSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{} classes × {} clauses × {} literals ({} words/row)",
            self.n_classes, self.clauses_per_class, self.n_literals, self.words_per_row
        )?;
        writeln!(
            f,
            "permutation: {}",
            if self.permuted { "present" } else { "absent" }
        )?;
        writeln!(
            f,
            "thermometer: {}",
            if self.has_thermometer {
                "present"
            } else {
                "absent"
            }
        )?;
        writeln!(f, "includes per class: {:?}", self.includes_per_class)?;
        writeln!(f, "mean P(include): {:.4}", self.mean_p_include)?;
        write!(
            f,
            "P(include) histogram (10 bins over [0,1]): {:?}",
            self.p_include_histogram
        )
    }
}
