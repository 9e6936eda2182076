//! Post-training, pre-inference literal reordering.
//!
//! Clause evaluation is an AND over included literals, so any included
//! literal that reads 0 settles the clause. Placing positions with a high
//! `P(literal = 0) * P(include)` early maximizes the chance that the
//! word-serial engines stop in the first few words. The permutation is
//! applied identically to TA action rows and to emitted literals, which
//! leaves every clause output unchanged.

use crate::bits::{pack_bits, PackedBits};
use crate::error::{Result, TmError};
use crate::model::{ActionModel, BoolDataset};

/// Per-literal statistics driving the reorder permutation.
///
/// `p_zero[p]` is the fraction of calibration samples where literal `p`
/// reads 0; `p_include[p]` is the fraction of all clause rows (pooled over
/// classes) whose TA action for `p` is include.
#[derive(Clone, Debug, PartialEq)]
pub struct ReorderStats {
    pub p_zero: Vec<f64>,
    pub p_include: Vec<f64>,
    pub product: Vec<f64>,
}

impl ReorderStats {
    pub fn new(p_zero: Vec<f64>, p_include: Vec<f64>) -> Result<Self> {
        if p_zero.len() != p_include.len() {
            return Err(TmError::LengthMismatch {
                expected: p_zero.len(),
                got: p_include.len(),
            });
        }
        let product = p_zero
            .iter()
            .zip(&p_include)
            .map(|(z, i)| z * i)
            .collect();
        Ok(ReorderStats {
            p_zero,
            p_include,
            product,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.product.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.product.is_empty()
    }
}

/// A bijection on literal positions. `order[p]` is the original position
/// that moves to new position `p`.
#[derive(Clone, Debug)]
pub struct Permutation {
    order: Vec<u32>,
    stats: Option<ReorderStats>,
}

/// Equality is the bijection itself; the statistics are provenance and
/// are not stored in model files.
impl PartialEq for Permutation {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
    }
}

impl Eq for Permutation {}

impl Permutation {
    /// Validates that `order` is a bijection on `[0, order.len())`.
    pub fn new(order: Vec<u32>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &o in &order {
            let o = o as usize;
            if o >= n || seen[o] {
                return Err(TmError::InvalidPermutation { len: n });
            }
            seen[o] = true;
        }
        Ok(Permutation { order, stats: None })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            order: (0..n as u32).collect(),
            stats: None,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    #[inline]
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Statistics that produced this permutation, when it came out of
    /// [`build_permutation`] rather than a model file.
    pub fn stats(&self) -> Option<&ReorderStats> {
        self.stats.as_ref()
    }

    /// Gathers `src` through the permutation: `out[p] = src[order[p]]`.
    pub fn gather<T: Copy>(&self, src: &[T]) -> Result<Vec<T>> {
        if src.len() != self.order.len() {
            return Err(TmError::LengthMismatch {
                expected: self.order.len(),
                got: src.len(),
            });
        }
        Ok(self.order.iter().map(|&o| src[o as usize]).collect())
    }

    /// The inverse bijection: `inverse().order()[original] = new position`.
    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u32; self.order.len()];
        for (p, &o) in self.order.iter().enumerate() {
            inv[o as usize] = p as u32;
        }
        Permutation {
            order: inv,
            stats: None,
        }
    }

    /// Stable 64-bit fingerprint (FNV-1a over the little-endian index
    /// stream); stored in dataset files to pair them with a model.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for &o in &self.order {
            for b in o.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

/// Fraction of calibration samples in which each literal reads 0.
pub fn literal_zero_prob(calibration: &BoolDataset) -> Result<Vec<f64>> {
    if calibration.n_samples() == 0 {
        return Err(TmError::EmptyDataset);
    }
    if calibration.permuted_with().is_some() {
        return Err(TmError::PermutationMismatch(
            "calibration dataset must be unpermuted".into(),
        ));
    }
    let n_literals = calibration.n_literals();
    let mut ones = vec![0u64; n_literals];
    for sample in calibration.samples() {
        for (w, &word) in sample.words().iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                ones[w * 32 + b] += 1;
                bits &= bits - 1;
            }
        }
    }
    let n = calibration.n_samples() as f64;
    Ok(ones.iter().map(|&c| 1.0 - c as f64 / n).collect())
}

/// Fraction of clause rows (pooled over all classes) that include each
/// literal position.
pub fn include_prob(model: &ActionModel) -> Vec<f64> {
    let n_literals = model.shape().n_literals();
    let total = model.shape().n_clauses_total() as f64;
    let mut counts = vec![0u64; n_literals];
    for row in model.rows() {
        for (w, &word) in row.words().iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                counts[w * 32 + b] += 1;
                bits &= bits - 1;
            }
        }
    }
    counts.iter().map(|&c| c as f64 / total.max(1.0)).collect()
}

/// Computes both statistics for an unpermuted model/calibration pair.
pub fn compute_stats(model: &ActionModel, calibration: &BoolDataset) -> Result<ReorderStats> {
    if model.permutation().is_some() {
        return Err(TmError::AlreadyPermuted);
    }
    if calibration.n_bool_features() != model.shape().n_bool_features {
        return Err(TmError::Shape(format!(
            "calibration has {} boolean features, model expects {}",
            calibration.n_bool_features(),
            model.shape().n_bool_features
        )));
    }
    ReorderStats::new(literal_zero_prob(calibration)?, include_prob(model))
}

/// Sorts positions by descending `p_zero * p_include`. Ties keep ascending
/// original index, so identical inputs always produce the identical
/// permutation.
pub fn build_permutation(stats: ReorderStats) -> Permutation {
    let mut order: Vec<u32> = (0..stats.product.len() as u32).collect();
    order.sort_by(|&a, &b| {
        stats.product[b as usize]
            .total_cmp(&stats.product[a as usize])
            .then(a.cmp(&b))
    });
    Permutation {
        order,
        stats: Some(stats),
    }
}

/// Gathers every action row through the permutation and stores the
/// permutation in the returned model. Popcounts, and therefore the
/// nonempty flags, are unchanged.
pub fn apply_permutation_model(model: &ActionModel, perm: &Permutation) -> Result<ActionModel> {
    if model.permutation().is_some() {
        return Err(TmError::AlreadyPermuted);
    }
    if perm.len() != model.shape().n_literals() {
        return Err(TmError::LengthMismatch {
            expected: model.shape().n_literals(),
            got: perm.len(),
        });
    }
    let rows = model
        .rows()
        .iter()
        .map(|row| Ok(pack_bits(&perm.gather(&row.to_bits())?)))
        .collect::<Result<Vec<PackedBits>>>()?;
    let mut out = ActionModel::new(model.shape(), rows)?;
    out.set_permutation(perm.clone());
    if let Some(th) = model.thermometer() {
        out.set_thermometer(th.clone());
    }
    Ok(out)
}

/// Gathers every sample row through the permutation and records the
/// permutation fingerprint on the returned dataset.
pub fn apply_permutation_dataset(data: &BoolDataset, perm: &Permutation) -> Result<BoolDataset> {
    if data.permuted_with().is_some() {
        return Err(TmError::PermutationMismatch(
            "dataset is already permuted".into(),
        ));
    }
    if perm.len() != data.n_literals() {
        return Err(TmError::LengthMismatch {
            expected: data.n_literals(),
            got: perm.len(),
        });
    }
    let samples = data
        .samples()
        .iter()
        .map(|s| Ok(pack_bits(&perm.gather(&s.to_bits())?)))
        .collect::<Result<Vec<PackedBits>>>()?;
    BoolDataset::new(
        data.n_bool_features(),
        samples,
        data.labels().to_vec(),
        Some(perm.fingerprint()),
    )
}

/// The full stage: statistics, permutation build, model gather. The
/// returned model expects literals emitted in the permuted order.
pub fn reorder_pipeline(
    model: &ActionModel,
    calibration: &BoolDataset,
) -> Result<(ActionModel, Permutation)> {
    let stats = compute_stats(model, calibration)?;
    let perm = build_permutation(stats);
    let reordered = apply_permutation_model(model, &perm)?;
    Ok((reordered, perm))
}
