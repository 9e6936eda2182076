//! Model and dataset containers: shape metadata, per-clause TA action rows
//! and booleanized sample matrices.

use crate::bits::{word_count, PackedBits};
use crate::booleanize::Thermometer;
use crate::error::{Result, TmError};
use crate::reorder::Permutation;

/// Shape metadata for a model. `n_literals` and the per-row word count are
/// derived so they cannot drift out of sync with the feature count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelShape {
    pub n_bool_features: usize,
    pub n_classes: usize,
    pub clauses_per_class: usize,
}

impl ModelShape {
    /// Two literals per boolean feature: the feature and its complement.
    #[inline]
    pub const fn n_literals(&self) -> usize {
        2 * self.n_bool_features
    }

    /// 32-bit words per action or literal row.
    #[inline]
    pub const fn words_per_row(&self) -> usize {
        word_count(self.n_literals())
    }

    #[inline]
    pub const fn n_clauses_total(&self) -> usize {
        self.n_classes * self.clauses_per_class
    }
}

/// Clause polarity convention: within a class, even-indexed clauses vote
/// +1 and odd-indexed clauses vote -1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Polarity;

impl Polarity {
    #[inline]
    pub const fn vote(clause_index: usize) -> i32 {
        if clause_index % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

/// Per-class, per-clause packed TA-action rows plus shape metadata.
///
/// Action bit = 1 means the literal is included in the clause AND;
/// padding bits are zero, i.e. excluded. The `nonempty` flags cache
/// whether a row has any include at all, which drives the empty-clause
/// inference rule without rescanning rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionModel {
    shape: ModelShape,
    /// Row-major: class-major, then clause.
    rows: Vec<PackedBits>,
    nonempty: Vec<bool>,
    permutation: Option<Permutation>,
    thermometer: Option<Thermometer>,
}

impl ActionModel {
    /// Builds a model from action rows (class-major, then clause),
    /// recomputing the nonempty flags and validating all row shapes.
    pub fn new(shape: ModelShape, rows: Vec<PackedBits>) -> Result<Self> {
        if rows.len() != shape.n_clauses_total() {
            return Err(TmError::LengthMismatch {
                expected: shape.n_clauses_total(),
                got: rows.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.logical_len() != shape.n_literals() {
                return Err(TmError::Shape(format!(
                    "action row {i}: expected {} literals, got {}",
                    shape.n_literals(),
                    row.logical_len()
                )));
            }
        }
        let nonempty = rows.iter().map(|r| r.count_ones() > 0).collect();
        Ok(ActionModel {
            shape,
            rows,
            nonempty,
            permutation: None,
            thermometer: None,
        })
    }

    /// Rebuilds a model read from storage, checking the stored nonempty
    /// flags against recomputed popcounts.
    pub(crate) fn from_parts(
        shape: ModelShape,
        rows: Vec<PackedBits>,
        stored_nonempty: Vec<bool>,
        permutation: Option<Permutation>,
        thermometer: Option<Thermometer>,
    ) -> Result<Self> {
        let mut model = ActionModel::new(shape, rows)?;
        if stored_nonempty.len() != model.nonempty.len() {
            return Err(TmError::LengthMismatch {
                expected: model.nonempty.len(),
                got: stored_nonempty.len(),
            });
        }
        if stored_nonempty != model.nonempty {
            return Err(TmError::Shape(
                "stored nonempty flags disagree with action row popcounts".into(),
            ));
        }
        if let Some(p) = &permutation {
            if p.len() != shape.n_literals() {
                return Err(TmError::LengthMismatch {
                    expected: shape.n_literals(),
                    got: p.len(),
                });
            }
        }
        model.permutation = permutation;
        model.thermometer = thermometer;
        Ok(model)
    }

    #[inline]
    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    #[inline]
    pub(crate) fn row_index(&self, class: usize, clause: usize) -> usize {
        class * self.shape.clauses_per_class + clause
    }

    #[inline]
    pub fn action_row(&self, class: usize, clause: usize) -> &PackedBits {
        &self.rows[self.row_index(class, clause)]
    }

    /// All rows, class-major then clause.
    #[inline]
    pub fn rows(&self) -> &[PackedBits] {
        &self.rows
    }

    #[inline]
    pub fn nonempty(&self, class: usize, clause: usize) -> bool {
        self.nonempty[self.row_index(class, clause)]
    }

    #[inline]
    pub fn nonempty_flags(&self) -> &[bool] {
        &self.nonempty
    }

    #[inline]
    pub fn permutation(&self) -> Option<&Permutation> {
        self.permutation.as_ref()
    }

    pub(crate) fn set_permutation(&mut self, perm: Permutation) {
        self.permutation = Some(perm);
    }

    #[inline]
    pub fn thermometer(&self) -> Option<&Thermometer> {
        self.thermometer.as_ref()
    }

    /// Attaches the booleanization thresholds so deployments can encode
    /// raw features without the training data.
    pub fn set_thermometer(&mut self, th: Thermometer) {
        self.thermometer = Some(th);
    }
}

/// Booleanized, packed sample matrix with labels.
///
/// Each sample row holds `2 * n_bool_features` literal bits: original
/// features then complements, or the reordered layout when built against
/// a permutation (recorded by `permuted_with`, the permutation
/// fingerprint).
#[derive(Clone, Debug, PartialEq)]
pub struct BoolDataset {
    n_bool_features: usize,
    samples: Vec<PackedBits>,
    labels: Vec<u32>,
    permuted_with: Option<u64>,
}

impl BoolDataset {
    pub fn new(
        n_bool_features: usize,
        samples: Vec<PackedBits>,
        labels: Vec<u32>,
        permuted_with: Option<u64>,
    ) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(TmError::LengthMismatch {
                expected: samples.len(),
                got: labels.len(),
            });
        }
        for (i, s) in samples.iter().enumerate() {
            if s.logical_len() != 2 * n_bool_features {
                return Err(TmError::Shape(format!(
                    "sample {i}: expected {} literals, got {}",
                    2 * n_bool_features,
                    s.logical_len()
                )));
            }
        }
        Ok(BoolDataset {
            n_bool_features,
            samples,
            labels,
            permuted_with,
        })
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn n_bool_features(&self) -> usize {
        self.n_bool_features
    }

    #[inline]
    pub fn n_literals(&self) -> usize {
        2 * self.n_bool_features
    }

    #[inline]
    pub fn words_per_row(&self) -> usize {
        word_count(self.n_literals())
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &PackedBits {
        &self.samples[i]
    }

    #[inline]
    pub fn samples(&self) -> &[PackedBits] {
        &self.samples
    }

    #[inline]
    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    #[inline]
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn permuted_with(&self) -> Option<u64> {
        self.permuted_with
    }

    /// Checks that every label is a valid class index for `n_classes`.
    pub fn validate_labels(&self, n_classes: usize) -> Result<()> {
        for (i, &label) in self.labels.iter().enumerate() {
            if label as usize >= n_classes {
                return Err(TmError::LabelOutOfRange {
                    sample: i,
                    label,
                    n_classes: n_classes as u32,
                });
            }
        }
        Ok(())
    }

    /// Checks that this dataset's literal layout matches the model's
    /// permutation state (both unpermuted, or fingerprints equal).
    pub fn validate_pairing(&self, model: &ActionModel) -> Result<()> {
        if self.n_bool_features != model.shape().n_bool_features {
            return Err(TmError::Shape(format!(
                "dataset has {} boolean features, model expects {}",
                self.n_bool_features,
                model.shape().n_bool_features
            )));
        }
        match (model.permutation(), self.permuted_with) {
            (None, None) => {}
            (Some(p), Some(fp)) if p.fingerprint() == fp => {}
            (Some(p), Some(fp)) => {
                return Err(TmError::PermutationMismatch(format!(
                    "model fingerprint {:#018x}, dataset fingerprint {fp:#018x}",
                    p.fingerprint()
                )));
            }
            (Some(_), None) => {
                return Err(TmError::PermutationMismatch(
                    "model is permuted but dataset is not".into(),
                ));
            }
            (None, Some(_)) => {
                return Err(TmError::PermutationMismatch(
                    "dataset is permuted but model is not".into(),
                ));
            }
        }
        self.validate_labels(model.shape().n_classes)
    }
}
