//! Minimal vanilla Tsetlin Machine trainer.
//!
//! Produces TA-action models at desk scale so the inference pipeline can
//! be exercised end to end. Feedback follows the classic scheme: clamped
//! class-sum feedback probabilities, Type I feedback (with strength
//! governed by the specificity `s`) toward clauses that should fire, and
//! Type II feedback against clauses of a competing class. Clause polarity
//! alternates within a class.
//!
//! During training an empty clause evaluates to 1 (otherwise nothing ever
//! receives reinforcement); the exported model is evaluated at inference
//! with the empty-clause-0 rule.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::PackedBits;
use crate::engines::{Evaluator, EngineKind};
use crate::error::{Result, TmError};
use crate::model::{ActionModel, BoolDataset, ModelShape, Polarity};

/// PRNG used for all training randomness. Fixed so a seed pins the model
/// bytes across runs and platforms.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Clone, Debug)]
pub struct TrainerConfig {
    pub clauses_per_class: usize,
    /// Voting target `T`: class sums are clamped to `[-T, T]` when
    /// computing feedback probabilities.
    pub threshold: u32,
    /// Specificity `s > 1`: Type I feedback strength.
    pub specificity: f64,
    pub epochs: usize,
    /// States per TA side; action is include iff `state > n_states`.
    pub n_states: u16,
    pub seed: u64,
}

impl TrainerConfig {
    pub fn new(clauses_per_class: usize, threshold: u32, specificity: f64) -> Self {
        TrainerConfig {
            clauses_per_class,
            threshold,
            specificity,
            epochs: 10,
            n_states: 100,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.clauses_per_class == 0 {
            return Err(TmError::InvalidConfig("clauses_per_class must be >= 1".into()));
        }
        if self.threshold == 0 {
            return Err(TmError::InvalidConfig("threshold T must be >= 1".into()));
        }
        if !(self.specificity > 1.0) {
            return Err(TmError::InvalidConfig("specificity s must be > 1".into()));
        }
        if self.epochs == 0 {
            return Err(TmError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.n_states == 0 || self.n_states > 16_000 {
            return Err(TmError::InvalidConfig(
                "n_states must be in [1, 16000]".into(),
            ));
        }
        Ok(())
    }
}

/// Per-(clause, literal) automaton states plus the derived include masks.
///
/// States live in `[1, 2 * n_states]`; include iff `state > n_states`.
/// The packed masks are updated incrementally on every boundary crossing
/// so training-time clause evaluation stays word-wide.
struct TaBank {
    n_classes: usize,
    clauses_per_class: usize,
    n_literals: usize,
    words_per_row: usize,
    n_states: i16,
    states: Vec<i16>,
    masks: Vec<u32>,
    include_count: Vec<u32>,
}

impl TaBank {
    fn new(n_classes: usize, clauses_per_class: usize, n_literals: usize, n_states: i16) -> Self {
        let n_rows = n_classes * clauses_per_class;
        let words_per_row = crate::bits::word_count(n_literals);
        TaBank {
            n_classes,
            clauses_per_class,
            n_literals,
            words_per_row,
            n_states,
            // Every automaton starts at the exclude boundary.
            states: vec![n_states; n_rows * n_literals],
            masks: vec![0; n_rows * words_per_row],
            include_count: vec![0; n_rows],
        }
    }

    #[inline]
    fn row_masks(&self, row: usize) -> &[u32] {
        &self.masks[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    #[inline]
    fn increment(&mut self, row: usize, p: usize) {
        let idx = row * self.n_literals + p;
        let st = self.states[idx];
        if st < 2 * self.n_states {
            self.states[idx] = st + 1;
            if st == self.n_states {
                self.masks[row * self.words_per_row + p / 32] |= 1 << (p % 32);
                self.include_count[row] += 1;
            }
        }
    }

    #[inline]
    fn decrement(&mut self, row: usize, p: usize) {
        let idx = row * self.n_literals + p;
        let st = self.states[idx];
        if st > 1 {
            self.states[idx] = st - 1;
            if st == self.n_states + 1 {
                self.masks[row * self.words_per_row + p / 32] &= !(1 << (p % 32));
                self.include_count[row] -= 1;
            }
        }
    }

    #[inline]
    fn is_include(&self, row: usize, p: usize) -> bool {
        self.states[row * self.n_literals + p] > self.n_states
    }

    /// Clause output with the training-time empty-clause-1 rule: an empty
    /// row has all-zero masks, so every word check passes.
    #[inline]
    fn clause_output(&self, row: usize, sample_words: &[u32]) -> bool {
        self.row_masks(row)
            .iter()
            .zip(sample_words)
            .all(|(&a, &l)| (!a | l) == u32::MAX)
    }

    fn update_class(
        &mut self,
        class: usize,
        threshold: u32,
        specificity: f64,
        sample_words: &[u32],
        sample_bits: &[u8],
        is_target: bool,
        outputs: &mut Vec<bool>,
        rng: &mut ChaCha8Rng,
    ) {
        let t = threshold as i32;
        outputs.clear();
        let mut sum = 0i32;
        for j in 0..self.clauses_per_class {
            let out = self.clause_output(class * self.clauses_per_class + j, sample_words);
            if out {
                sum += Polarity::vote(j);
            }
            outputs.push(out);
        }
        let sum = sum.clamp(-t, t);
        let p_feedback = if is_target {
            (t - sum) as f64 / (2 * t) as f64
        } else {
            (t + sum) as f64 / (2 * t) as f64
        };

        for j in 0..self.clauses_per_class {
            if rng.random::<f64>() > p_feedback {
                continue;
            }
            let row = class * self.clauses_per_class + j;
            let positive_clause = Polarity::vote(j) > 0;
            if is_target == positive_clause {
                self.type_i(row, sample_bits, outputs[j], specificity, rng);
            } else {
                self.type_ii(row, sample_bits, outputs[j]);
            }
        }
    }

    /// Type I: reinforce the pattern when the clause fires, otherwise
    /// erode every automaton with probability `1/s`.
    fn type_i(
        &mut self,
        row: usize,
        sample_bits: &[u8],
        output: bool,
        specificity: f64,
        rng: &mut ChaCha8Rng,
    ) {
        let inv_s = 1.0 / specificity;
        if output {
            let keep = 1.0 - inv_s;
            for p in 0..self.n_literals {
                if sample_bits[p] != 0 {
                    if rng.random::<f64>() <= keep {
                        self.increment(row, p);
                    }
                } else if rng.random::<f64>() <= inv_s {
                    self.decrement(row, p);
                }
            }
        } else {
            // Geometric skips visit exactly the positions that a
            // per-position Bernoulli(1/s) draw would have selected.
            let mut p = geometric_skip(rng, inv_s);
            while p < self.n_literals {
                self.decrement(row, p);
                p += 1 + geometric_skip(rng, inv_s);
            }
        }
    }

    /// Type II: when a clause fires against the wrong class, push the
    /// excluded automata of 0-valued literals toward include so the
    /// clause learns a discriminating condition.
    fn type_ii(&mut self, row: usize, sample_bits: &[u8], output: bool) {
        if !output {
            return;
        }
        for p in 0..self.n_literals {
            if sample_bits[p] == 0 && !self.is_include(row, p) {
                self.increment(row, p);
            }
        }
    }

    fn export(&self) -> Result<ActionModel> {
        let shape = ModelShape {
            n_bool_features: self.n_literals / 2,
            n_classes: self.n_classes,
            clauses_per_class: self.clauses_per_class,
        };
        let rows = (0..self.n_classes * self.clauses_per_class)
            .map(|row| PackedBits::from_words(self.row_masks(row).to_vec(), self.n_literals))
            .collect::<Result<Vec<_>>>()?;
        ActionModel::new(shape, rows)
    }
}

/// Failure count before the first success of a Bernoulli(`q`) sequence.
#[inline]
fn geometric_skip(rng: &mut ChaCha8Rng, q: f64) -> usize {
    let u: f64 = rng.random();
    let skip = ((1.0 - u).ln() / (1.0 - q).ln()).floor();
    if skip.is_finite() && skip >= 0.0 {
        skip as usize
    } else {
        usize::MAX / 2
    }
}

/// Trains a model on an unpermuted dataset. The class count is inferred
/// from the labels (max label + 1). Deterministic for a fixed seed.
pub fn train(data: &BoolDataset, cfg: &TrainerConfig) -> Result<ActionModel> {
    cfg.validate()?;
    if data.n_samples() == 0 {
        return Err(TmError::EmptyDataset);
    }
    if data.permuted_with().is_some() {
        return Err(TmError::PermutationMismatch(
            "training data must be unpermuted".into(),
        ));
    }
    let n_classes = *data.labels().iter().max().unwrap() as usize + 1;
    let n_literals = data.n_literals();
    let words_per_row = data.words_per_row();

    // Flatten once; feedback needs per-literal access, evaluation needs
    // words.
    let mut words = Vec::with_capacity(data.n_samples() * words_per_row);
    let mut bits = Vec::with_capacity(data.n_samples() * n_literals);
    for s in data.samples() {
        words.extend_from_slice(s.words());
        bits.extend_from_slice(&s.to_bits());
    }

    let mut bank = TaBank::new(
        n_classes,
        cfg.clauses_per_class,
        n_literals,
        cfg.n_states as i16,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.n_samples()).collect();
    let mut outputs = Vec::with_capacity(cfg.clauses_per_class);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let y = data.label(i) as usize;
            let sample_words = &words[i * words_per_row..(i + 1) * words_per_row];
            let sample_bits = &bits[i * n_literals..(i + 1) * n_literals];
            bank.update_class(
                y,
                cfg.threshold,
                cfg.specificity,
                sample_words,
                sample_bits,
                true,
                &mut outputs,
                &mut rng,
            );
            if n_classes > 1 {
                let mut negative = rng.random_range(0..n_classes - 1);
                if negative >= y {
                    negative += 1;
                }
                bank.update_class(
                    negative,
                    cfg.threshold,
                    cfg.specificity,
                    sample_words,
                    sample_bits,
                    false,
                    &mut outputs,
                    &mut rng,
                );
            }
        }
    }
    bank.export()
}

/// Test accuracy of a model on a dataset (word-serial early-exit engine).
pub fn evaluate(model: &ActionModel, data: &BoolDataset) -> Result<f64> {
    let batch = Evaluator::new(model, EngineKind::BitwiseEarlyExit).predict_batch(data)?;
    batch.accuracy.ok_or(TmError::EmptyDataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::pack_bits;
    use crate::booleanize::emit_literals;
    use crate::io::model_to_bytes;

    /// Four clearly separated binary patterns, one per class.
    fn toy_dataset(copies: usize) -> BoolDataset {
        let patterns: [&[u8]; 4] = [
            &[1, 1, 0, 0, 0, 0],
            &[0, 0, 1, 1, 0, 0],
            &[0, 0, 0, 0, 1, 1],
            &[1, 0, 1, 0, 1, 0],
        ];
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..copies {
            for (label, bits) in patterns.iter().enumerate() {
                samples.push(emit_literals(bits, None).unwrap());
                labels.push(label as u32);
            }
        }
        BoolDataset::new(6, samples, labels, None).unwrap()
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_dataset(8);
        let mut cfg = TrainerConfig::new(8, 4, 3.9);
        cfg.epochs = 20;
        cfg.seed = 7;
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(model_to_bytes(&a), model_to_bytes(&b));

        cfg.seed = 8;
        let c = train(&data, &cfg).unwrap();
        assert_ne!(model_to_bytes(&a), model_to_bytes(&c));
    }

    #[test]
    fn memorizes_toy_patterns() {
        let data = toy_dataset(8);
        let mut cfg = TrainerConfig::new(10, 4, 3.9);
        cfg.epochs = 60;
        cfg.seed = 1;
        let model = train(&data, &cfg).unwrap();
        assert_eq!(evaluate(&model, &data).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_identical_across_engines() {
        let data = toy_dataset(6);
        let mut cfg = TrainerConfig::new(6, 3, 3.0);
        cfg.epochs = 30;
        cfg.seed = 3;
        let model = train(&data, &cfg).unwrap();
        let accuracies: Vec<f64> = EngineKind::ALL
            .iter()
            .map(|&e| {
                Evaluator::new(&model, e)
                    .predict_batch(&data)
                    .unwrap()
                    .accuracy
                    .unwrap()
            })
            .collect();
        assert!(accuracies.windows(2).all(|w| w[0] == w[1]), "{accuracies:?}");
    }

    #[test]
    fn untrained_model_predicts_class_zero() {
        // All-exclude model: every class sum is 0, ties go to class 0.
        let shape = ModelShape {
            n_bool_features: 6,
            n_classes: 4,
            clauses_per_class: 2,
        };
        let rows = vec![pack_bits(&[0; 12]); 8];
        let model = ActionModel::new(shape, rows).unwrap();
        let data = toy_dataset(1);
        let batch = Evaluator::new(&model, EngineKind::BitwiseEarlyExit)
            .predict_batch(&data)
            .unwrap();
        for r in &batch.reports {
            assert_eq!(r.predicted_class, 0);
            assert!(r.class_sums.iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn states_stay_in_range_and_match_exported_actions() {
        let data = toy_dataset(8);
        let n_literals = data.n_literals();
        let mut bank = TaBank::new(4, 6, n_literals, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut outputs = Vec::new();

        let mut words = Vec::new();
        let mut bits = Vec::new();
        for s in data.samples() {
            words.extend_from_slice(s.words());
            bits.extend_from_slice(&s.to_bits());
        }
        let wpr = data.words_per_row();
        for _ in 0..30 {
            for i in 0..data.n_samples() {
                let y = data.label(i) as usize;
                bank.update_class(
                    y,
                    3,
                    3.0,
                    &words[i * wpr..(i + 1) * wpr],
                    &bits[i * n_literals..(i + 1) * n_literals],
                    true,
                    &mut outputs,
                    &mut rng,
                );
                let negative = (y + 1) % 4;
                bank.update_class(
                    negative,
                    3,
                    3.0,
                    &words[i * wpr..(i + 1) * wpr],
                    &bits[i * n_literals..(i + 1) * n_literals],
                    false,
                    &mut outputs,
                    &mut rng,
                );
            }
        }
        assert!(bank.states.iter().all(|&s| (1..=48).contains(&s)));

        let model = bank.export().unwrap();
        for row in 0..4 * 6 {
            for p in 0..n_literals {
                let expected = bank.states[row * n_literals + p] > 24;
                assert_eq!(model.rows()[row].get(p), expected);
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let data = toy_dataset(1);
        let mut cfg = TrainerConfig::new(4, 1, 3.0);
        cfg.specificity = 1.0;
        assert!(matches!(
            train(&data, &cfg),
            Err(TmError::InvalidConfig(_))
        ));
        let cfg = TrainerConfig::new(0, 1, 3.0);
        assert!(matches!(
            train(&data, &cfg),
            Err(TmError::InvalidConfig(_))
        ));
    }

    #[test]
    fn rejects_permuted_training_data() {
        let base = toy_dataset(1);
        let data = BoolDataset::new(
            base.n_bool_features(),
            base.samples().to_vec(),
            base.labels().to_vec(),
            Some(1),
        )
        .unwrap();
        assert!(matches!(
            train(&data, &TrainerConfig::new(4, 1, 3.0)),
            Err(TmError::PermutationMismatch(_))
        ));
    }

    #[test]
    fn geometric_skip_mean_matches_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = 0.125f64;
        let n = 20_000;
        let total: usize = (0..n).map(|_| geometric_skip(&mut rng, q)).sum();
        let mean = total as f64 / n as f64;
        let expected = (1.0 - q) / q; // 7.0
        assert!((mean - expected).abs() < 0.3, "mean {mean}");
    }
}
