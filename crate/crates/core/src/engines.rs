//! The four clause-evaluation engines and the class-sum voting layer.
//!
//! All four compute the same function: a clause fires iff every included
//! literal reads 1 and the clause includes at least one literal. They
//! differ only in how much work they do to find out:
//!
//! * `Baseline` — one integer comparison per literal, always scanning to
//!   the last literal.
//! * `EarlyExit` — the same scan, aborted at the first included literal
//!   that reads 0.
//! * `Bitwise` — 32 literals per step: a word fails the clause when
//!   `(!actions | literals) != 0xFFFF_FFFF`; every word is visited.
//! * `BitwiseEarlyExit` — the word scan, stopped at the first failing
//!   word.
//!
//! Excluded positions contribute an always-1 term to the clause AND, so
//! zero padding in the action rows never affects an output.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bits::PackedBits;
use crate::error::{Result, TmError};
use crate::model::{ActionModel, BoolDataset, Polarity};

/// Selects one of the four clause-evaluation strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Baseline,
    EarlyExit,
    Bitwise,
    #[serde(rename = "bitwise-ee")]
    BitwiseEarlyExit,
}

impl EngineKind {
    pub const ALL: [EngineKind; 4] = [
        EngineKind::Baseline,
        EngineKind::EarlyExit,
        EngineKind::Bitwise,
        EngineKind::BitwiseEarlyExit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EngineKind::Baseline => "baseline",
            EngineKind::EarlyExit => "early-exit",
            EngineKind::Bitwise => "bitwise",
            EngineKind::BitwiseEarlyExit => "bitwise-ee",
        }
    }

    /// True for the engines that scan packed words rather than unpacked
    /// literals.
    #[inline]
    pub fn is_bitwise(&self) -> bool {
        matches!(self, EngineKind::Bitwise | EngineKind::BitwiseEarlyExit)
    }

    /// True for the engines that stop at the first violation.
    #[inline]
    pub fn is_early_exit(&self) -> bool {
        matches!(self, EngineKind::EarlyExit | EngineKind::BitwiseEarlyExit)
    }
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EngineKind {
    type Err = TmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(EngineKind::Baseline),
            "early-exit" => Ok(EngineKind::EarlyExit),
            "bitwise" => Ok(EngineKind::Bitwise),
            "bitwise-ee" => Ok(EngineKind::BitwiseEarlyExit),
            other => Err(TmError::InvalidConfig(format!(
                "unknown engine {other:?} (expected baseline|early-exit|bitwise|bitwise-ee)"
            ))),
        }
    }
}

/// Outcome of one clause evaluation. `examined` counts literal positions
/// for the integer engines and 32-bit words for the bitwise engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClauseResult {
    pub output: bool,
    pub examined: u32,
}

/// Integer engine without early exit: scans every position even after the
/// output is settled, so `examined` always equals the row length. Rows are
/// one 32-bit integer per {0,1} value, the conventional unpacked layout.
pub fn clause_baseline(actions: &[i32], literals: &[i32]) -> Result<ClauseResult> {
    check_len(actions.len(), literals.len())?;
    Ok(baseline_raw(actions, literals))
}

/// Integer engine with early exit: stops at the first included literal
/// that reads 0.
pub fn clause_early_exit(actions: &[i32], literals: &[i32]) -> Result<ClauseResult> {
    check_len(actions.len(), literals.len())?;
    Ok(early_exit_raw(actions, literals))
}

/// Word engine without early exit: visits every word and requires each
/// `(!actions | literals)` to be all-ones.
pub fn clause_bitwise(
    actions: &PackedBits,
    literals: &PackedBits,
    nonempty: bool,
) -> Result<ClauseResult> {
    check_len(actions.words().len(), literals.words().len())?;
    Ok(bitwise_raw(actions.words(), literals.words(), nonempty))
}

/// Word engine with early exit: stops at the first word whose
/// `(!actions | literals)` is not all-ones.
pub fn clause_bitwise_ee(
    actions: &PackedBits,
    literals: &PackedBits,
    nonempty: bool,
) -> Result<ClauseResult> {
    check_len(actions.words().len(), literals.words().len())?;
    Ok(bitwise_ee_raw(actions.words(), literals.words(), nonempty))
}

/// [`clause_bitwise`] over raw word slices. Action padding must be zero
/// (excluded); literal padding may hold arbitrary bits — excluded
/// positions never affect the output.
pub fn clause_bitwise_words(
    action_words: &[u32],
    literal_words: &[u32],
    nonempty: bool,
) -> Result<ClauseResult> {
    check_len(action_words.len(), literal_words.len())?;
    Ok(bitwise_raw(action_words, literal_words, nonempty))
}

/// [`clause_bitwise_ee`] over raw word slices; see
/// [`clause_bitwise_words`] for the padding contract.
pub fn clause_bitwise_ee_words(
    action_words: &[u32],
    literal_words: &[u32],
    nonempty: bool,
) -> Result<ClauseResult> {
    check_len(action_words.len(), literal_words.len())?;
    Ok(bitwise_ee_raw(action_words, literal_words, nonempty))
}

#[inline]
fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(TmError::LengthMismatch { expected, got });
    }
    Ok(())
}

#[inline]
pub(crate) fn baseline_raw(actions: &[i32], literals: &[i32]) -> ClauseResult {
    debug_assert_eq!(actions.len(), literals.len());
    let mut satisfied = true;
    let mut nonempty = false;
    for (&action, &literal) in actions.iter().zip(literals) {
        if action != 0 {
            nonempty = true;
            if literal == 0 {
                // The barrier keeps the violation check as real per-literal
                // control flow; if-converted masked SIMD would be a
                // different engine than the one this models.
                satisfied = std::hint::black_box(false);
            }
        }
    }
    ClauseResult {
        output: satisfied && nonempty,
        examined: actions.len() as u32,
    }
}

#[inline]
pub(crate) fn early_exit_raw(actions: &[i32], literals: &[i32]) -> ClauseResult {
    let n = actions.len().min(literals.len());
    debug_assert_eq!(actions.len(), literals.len());
    let mut nonempty = false;
    let mut p = 0;
    while p < n {
        let action = actions[p];
        if action != 0 {
            if literals[p] == 0 {
                return ClauseResult {
                    output: false,
                    examined: p as u32 + 1,
                };
            }
            nonempty = true;
        }
        p += 1;
    }
    ClauseResult {
        output: nonempty,
        examined: n as u32,
    }
}

#[inline]
pub(crate) fn bitwise_raw(actions: &[u32], literals: &[u32], nonempty: bool) -> ClauseResult {
    debug_assert_eq!(actions.len(), literals.len());
    let mut all_ones = true;
    for (&action, &literal) in actions.iter().zip(literals) {
        if (!action | literal) != u32::MAX {
            all_ones = false;
        }
    }
    ClauseResult {
        output: all_ones && nonempty,
        examined: actions.len() as u32,
    }
}

#[inline]
pub(crate) fn bitwise_ee_raw(actions: &[u32], literals: &[u32], nonempty: bool) -> ClauseResult {
    debug_assert_eq!(actions.len(), literals.len());
    for (w, (&action, &literal)) in actions.iter().zip(literals).enumerate() {
        if (!action | literal) != u32::MAX {
            return ClauseResult {
                output: false,
                examined: w as u32 + 1,
            };
        }
    }
    ClauseResult {
        output: nonempty,
        examined: actions.len() as u32,
    }
}

/// Signed vote sum under the alternating polarity convention; no clamping
/// is applied at inference.
pub fn class_sum(clause_outputs: &[bool]) -> i32 {
    clause_outputs
        .iter()
        .enumerate()
        .map(|(j, &out)| if out { Polarity::vote(j) } else { 0 })
        .sum()
}

/// Work counters aggregated over clause evaluations. Words are counted by
/// the bitwise engines, literals by the integer engines; an early exit is
/// any evaluation that stopped before its last unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCounters {
    pub literals_examined: u64,
    pub words_examined: u64,
    pub clauses_evaluated: u64,
    pub early_exits_taken: u64,
}

impl WorkCounters {
    pub fn add(&mut self, other: &WorkCounters) {
        self.literals_examined += other.literals_examined;
        self.words_examined += other.words_examined;
        self.clauses_evaluated += other.clauses_evaluated;
        self.early_exits_taken += other.early_exits_taken;
    }
}

/// Prediction plus the work done to reach it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub predicted_class: u32,
    pub class_sums: Vec<i32>,
    pub counters: WorkCounters,
    pub wall_time_ns: u64,
}

/// Batch outcome: per-sample reports in input order plus the fraction of
/// correct predictions (absent for an empty dataset).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub reports: Vec<InferenceReport>,
    pub accuracy: Option<f64>,
}

/// A model prepared for repeated evaluation with one engine.
///
/// The integer engines work on the conventional unpacked representation
/// (one integer per literal), so the action rows are expanded once here
/// rather than per call; the bitwise engines borrow the packed rows
/// directly.
pub struct Evaluator<'m> {
    model: &'m ActionModel,
    engine: EngineKind,
    /// Flattened packed rows, class-major: `n_rows * words_per_row` words.
    packed_rows: Vec<u32>,
    /// Flattened unpacked rows for the integer engines.
    unpacked_rows: Vec<i32>,
    nonempty: Vec<bool>,
}

/// Samples prepared for an [`Evaluator`]: literal rows flattened (and
/// unpacked when the engine needs integer rows), labels validated against
/// the model.
pub struct PreparedData {
    n_samples: usize,
    words_per_row: usize,
    n_literals: usize,
    words: Vec<u32>,
    unpacked: Vec<i32>,
    labels: Vec<u32>,
}

impl PreparedData {
    #[inline]
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    #[inline]
    fn sample_words(&self, i: usize) -> &[u32] {
        &self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    #[inline]
    fn sample_literals(&self, i: usize) -> &[i32] {
        // Empty for the bitwise engines, which never unpack.
        if self.unpacked.is_empty() {
            &[]
        } else {
            &self.unpacked[i * self.n_literals..(i + 1) * self.n_literals]
        }
    }
}

impl<'m> Evaluator<'m> {
    pub fn new(model: &'m ActionModel, engine: EngineKind) -> Self {
        let words_per_row = model.shape().words_per_row();
        let mut packed_rows = Vec::with_capacity(model.rows().len() * words_per_row);
        for row in model.rows() {
            packed_rows.extend_from_slice(row.words());
        }
        let unpacked_rows = if engine.is_bitwise() {
            Vec::new()
        } else {
            let mut v = Vec::with_capacity(model.rows().len() * model.shape().n_literals());
            for row in model.rows() {
                v.extend(row.to_bits().iter().map(|&b| b as i32));
            }
            v
        };
        Evaluator {
            model,
            engine,
            packed_rows,
            unpacked_rows,
            nonempty: model.nonempty_flags().to_vec(),
        }
    }

    #[inline]
    pub fn engine(&self) -> EngineKind {
        self.engine
    }

    #[inline]
    pub fn model(&self) -> &ActionModel {
        self.model
    }

    /// Validates a dataset against the model and lays its samples out for
    /// this engine.
    pub fn prepare(&self, data: &BoolDataset) -> Result<PreparedData> {
        data.validate_pairing(self.model)?;
        let words_per_row = self.model.shape().words_per_row();
        let n_literals = self.model.shape().n_literals();
        let mut words = Vec::with_capacity(data.n_samples() * words_per_row);
        for s in data.samples() {
            words.extend_from_slice(s.words());
        }
        let unpacked = if self.engine.is_bitwise() {
            Vec::new()
        } else {
            let mut v = Vec::with_capacity(data.n_samples() * n_literals);
            for s in data.samples() {
                v.extend(s.to_bits().iter().map(|&b| b as i32));
            }
            v
        };
        Ok(PreparedData {
            n_samples: data.n_samples(),
            words_per_row,
            n_literals,
            words,
            unpacked,
            labels: data.labels().to_vec(),
        })
    }

    /// Evaluates every clause of every class for one sample, writing the
    /// class sums and accumulating work counters. Returns the predicted
    /// class: the smallest index achieving the maximum sum.
    fn eval_sample(
        &self,
        sample_words: &[u32],
        sample_literals: &[i32],
        sums: &mut [i32],
        counters: &mut WorkCounters,
    ) -> u32 {
        let shape = self.model.shape();
        let words_per_row = shape.words_per_row();
        let n_literals = shape.n_literals();
        let clauses = shape.clauses_per_class;
        let mut row = 0usize;
        for sum in sums.iter_mut() {
            let mut s = 0i32;
            for j in 0..clauses {
                let result = match self.engine {
                    EngineKind::Baseline => {
                        let actions =
                            &self.unpacked_rows[row * n_literals..(row + 1) * n_literals];
                        baseline_raw(actions, sample_literals)
                    }
                    EngineKind::EarlyExit => {
                        let actions =
                            &self.unpacked_rows[row * n_literals..(row + 1) * n_literals];
                        early_exit_raw(actions, sample_literals)
                    }
                    EngineKind::Bitwise => {
                        let actions =
                            &self.packed_rows[row * words_per_row..(row + 1) * words_per_row];
                        bitwise_raw(actions, sample_words, self.nonempty[row])
                    }
                    EngineKind::BitwiseEarlyExit => {
                        let actions =
                            &self.packed_rows[row * words_per_row..(row + 1) * words_per_row];
                        bitwise_ee_raw(actions, sample_words, self.nonempty[row])
                    }
                };
                if result.output {
                    s += Polarity::vote(j);
                }
                let full = if self.engine.is_bitwise() {
                    counters.words_examined += result.examined as u64;
                    words_per_row as u64
                } else {
                    counters.literals_examined += result.examined as u64;
                    n_literals as u64
                };
                if (result.examined as u64) < full {
                    counters.early_exits_taken += 1;
                }
                row += 1;
            }
            counters.clauses_evaluated += clauses as u64;
            *sum = s;
        }
        argmax_lowest(sums)
    }

    /// Predicts one sample, timing the evaluation.
    pub fn predict(&self, literals: &PackedBits) -> Result<InferenceReport> {
        let shape = self.model.shape();
        if literals.logical_len() != shape.n_literals() {
            return Err(TmError::LengthMismatch {
                expected: shape.n_literals(),
                got: literals.logical_len(),
            });
        }
        let unpacked: Vec<i32> = if self.engine.is_bitwise() {
            Vec::new()
        } else {
            literals.to_bits().iter().map(|&b| b as i32).collect()
        };
        let mut sums = vec![0i32; shape.n_classes];
        let mut counters = WorkCounters::default();
        let start = Instant::now();
        let predicted =
            self.eval_sample(literals.words(), &unpacked, &mut sums, &mut counters);
        let wall_time_ns = start.elapsed().as_nanos() as u64;
        Ok(InferenceReport {
            predicted_class: predicted,
            class_sums: sums,
            counters,
            wall_time_ns,
        })
    }

    /// Predicts every sample in order, reporting per-sample work and the
    /// aggregate accuracy.
    pub fn predict_batch(&self, data: &BoolDataset) -> Result<BatchReport> {
        let prepared = self.prepare(data)?;
        let mut reports = Vec::with_capacity(prepared.n_samples);
        let mut correct = 0u64;
        for i in 0..prepared.n_samples {
            let mut sums = vec![0i32; self.model.shape().n_classes];
            let mut counters = WorkCounters::default();
            let start = Instant::now();
            let predicted = self.eval_sample(
                prepared.sample_words(i),
                prepared.sample_literals(i),
                &mut sums,
                &mut counters,
            );
            let wall_time_ns = start.elapsed().as_nanos() as u64;
            if predicted == prepared.labels[i] {
                correct += 1;
            }
            reports.push(InferenceReport {
                predicted_class: predicted,
                class_sums: sums,
                counters,
                wall_time_ns,
            });
        }
        let accuracy = if prepared.n_samples == 0 {
            None
        } else {
            Some(correct as f64 / prepared.n_samples as f64)
        };
        Ok(BatchReport { reports, accuracy })
    }

    /// Same results as [`predict_batch`](Self::predict_batch) with samples
    /// evaluated in parallel; everything except per-sample wall times is
    /// bit-identical to the serial path.
    pub fn predict_batch_parallel(&self, data: &BoolDataset) -> Result<BatchReport> {
        use rayon::prelude::*;
        let prepared = self.prepare(data)?;
        let n_classes = self.model.shape().n_classes;
        let reports: Vec<InferenceReport> = (0..prepared.n_samples)
            .into_par_iter()
            .map(|i| {
                let mut sums = vec![0i32; n_classes];
                let mut counters = WorkCounters::default();
                let start = Instant::now();
                let predicted = self.eval_sample(
                    prepared.sample_words(i),
                    prepared.sample_literals(i),
                    &mut sums,
                    &mut counters,
                );
                InferenceReport {
                    predicted_class: predicted,
                    class_sums: sums,
                    counters,
                    wall_time_ns: start.elapsed().as_nanos() as u64,
                }
            })
            .collect();
        let correct = reports
            .iter()
            .zip(&prepared.labels)
            .filter(|(r, &l)| r.predicted_class == l)
            .count();
        let accuracy = if prepared.n_samples == 0 {
            None
        } else {
            Some(correct as f64 / prepared.n_samples as f64)
        };
        Ok(BatchReport { reports, accuracy })
    }

    /// One pass over prepared samples without per-sample allocation; the
    /// timing loop of the benchmark harness. Returns a fold of the
    /// predictions (so the work cannot be optimized away), the number of
    /// correct predictions and the aggregated counters.
    pub fn pass(&self, prepared: &PreparedData) -> PassOutcome {
        let mut sums = vec![0i32; self.model.shape().n_classes];
        let mut counters = WorkCounters::default();
        let mut checksum = 0u64;
        let mut correct = 0u64;
        for i in 0..prepared.n_samples {
            let predicted = self.eval_sample(
                prepared.sample_words(i),
                prepared.sample_literals(i),
                &mut sums,
                &mut counters,
            );
            checksum = checksum
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add(predicted as u64);
            if predicted == prepared.labels[i] {
                correct += 1;
            }
        }
        PassOutcome {
            prediction_checksum: checksum,
            correct,
            counters,
        }
    }

    /// Sample-parallel version of [`pass`](Self::pass). The prediction
    /// fold is order-independent (and therefore differs from the serial
    /// fold); counters and the correct count are bit-identical to the
    /// serial path regardless of thread count.
    pub fn pass_parallel(&self, prepared: &PreparedData) -> PassOutcome {
        use rayon::prelude::*;
        let n_classes = self.model.shape().n_classes;
        let (prediction_checksum, correct, counters) = (0..prepared.n_samples)
            .into_par_iter()
            .fold(
                || (0u64, 0u64, WorkCounters::default(), vec![0i32; n_classes]),
                |(mut checksum, mut correct, mut counters, mut sums), i| {
                    let predicted = self.eval_sample(
                        prepared.sample_words(i),
                        prepared.sample_literals(i),
                        &mut sums,
                        &mut counters,
                    );
                    checksum = checksum.wrapping_add(
                        (i as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15)
                            ^ (predicted as u64 + 1),
                    );
                    if predicted == prepared.labels[i] {
                        correct += 1;
                    }
                    (checksum, correct, counters, sums)
                },
            )
            .map(|(checksum, correct, counters, _)| (checksum, correct, counters))
            .reduce(
                || (0u64, 0u64, WorkCounters::default()),
                |a, b| {
                    let mut counters = a.2;
                    counters.add(&b.2);
                    (a.0.wrapping_add(b.0), a.1 + b.1, counters)
                },
            );
        PassOutcome {
            prediction_checksum,
            correct,
            counters,
        }
    }
}

/// Aggregate result of one whole-dataset pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PassOutcome {
    pub prediction_checksum: u64,
    pub correct: u64,
    pub counters: WorkCounters,
}

#[inline]
fn argmax_lowest(sums: &[i32]) -> u32 {
    let mut best = 0usize;
    for (c, &s) in sums.iter().enumerate().skip(1) {
        if s > sums[best] {
            best = c;
        }
    }
    best as u32
}

/// Convenience single-shot prediction; builds a throwaway [`Evaluator`].
/// Use an `Evaluator` directly when predicting more than once.
pub fn predict(
    model: &ActionModel,
    literals: &PackedBits,
    engine: EngineKind,
) -> Result<InferenceReport> {
    Evaluator::new(model, engine).predict(literals)
}

/// Convenience batch prediction; see [`predict`].
pub fn predict_batch(
    model: &ActionModel,
    data: &BoolDataset,
    engine: EngineKind,
) -> Result<BatchReport> {
    Evaluator::new(model, engine).predict_batch(data)
}
