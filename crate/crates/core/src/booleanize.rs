//! Raw-dataset ingestion (CSV, IDX images) and thermometer booleanization.
//!
//! Each raw feature is compared against a ladder of thresholds; bit
//! `(f, b)` is 1 iff `x[f] > t_b(f)`, so the bits for one feature always
//! form a `1^k 0^(B-k)` staircase. Literals can be emitted directly in a
//! reordered layout so no separate gather pass is needed at inference
//! time.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bits::{negate_extend, pack_bits, PackedBits};
use crate::error::{Result, TmError};
use crate::model::BoolDataset;
use crate::reorder::Permutation;

/// Rectangular real-valued dataset with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub n_raw_features: usize,
    /// Row-major sample values, `n_samples * n_raw_features` long.
    pub values: Vec<f64>,
    pub labels: Vec<u32>,
}

impl RawDataset {
    pub fn new(n_raw_features: usize, values: Vec<f64>, labels: Vec<u32>) -> Result<Self> {
        if n_raw_features == 0 || values.len() != labels.len() * n_raw_features {
            return Err(TmError::Shape(format!(
                "{} values do not form {} samples of {} features",
                values.len(),
                labels.len(),
                n_raw_features
            )));
        }
        Ok(RawDataset {
            n_raw_features,
            values,
            labels,
        })
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_raw_features..(i + 1) * self.n_raw_features]
    }
}

/// Per-feature threshold ladders: `bins` strictly increasing thresholds
/// per raw feature, flattened feature-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thermometer {
    n_raw_features: usize,
    bins: usize,
    thresholds: Vec<f64>,
}

impl Thermometer {
    /// Fits per-feature quantile thresholds: threshold `q` (1-based) is
    /// the `q/(bins+1)` quantile of the feature's empirical distribution,
    /// with linear interpolation between order statistics. Duplicate
    /// quantiles (constant or heavily tied features) are nudged up to the
    /// next representable value so the ladder stays strictly increasing;
    /// the strict `>` comparison then maps a constant feature to all-zero
    /// bits.
    pub fn fit(raw: &RawDataset, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(TmError::InvalidConfig("bins must be >= 1".into()));
        }
        if raw.n_samples() == 0 {
            return Err(TmError::EmptyDataset);
        }
        let mut thresholds = Vec::with_capacity(raw.n_raw_features * bins);
        let mut column = vec![0.0f64; raw.n_samples()];
        for f in 0..raw.n_raw_features {
            for (i, v) in column.iter_mut().enumerate() {
                *v = raw.values[i * raw.n_raw_features + f];
            }
            column.sort_by(f64::total_cmp);
            let start = thresholds.len();
            for q in 1..=bins {
                thresholds.push(quantile_sorted(&column, q as f64 / (bins + 1) as f64));
            }
            make_strictly_increasing(&mut thresholds[start..]);
        }
        Ok(Thermometer {
            n_raw_features: raw.n_raw_features,
            bins,
            thresholds,
        })
    }

    /// Single-bin binarizer with one shared threshold: the median of all
    /// nonzero values pooled across features and samples. Suited to image
    /// intensities where zero is background.
    pub fn fit_binary_nonzero_median(raw: &RawDataset) -> Result<Self> {
        if raw.n_samples() == 0 {
            return Err(TmError::EmptyDataset);
        }
        let mut nonzero: Vec<f64> = raw.values.iter().copied().filter(|&v| v != 0.0).collect();
        let t = if nonzero.is_empty() {
            0.0
        } else {
            nonzero.sort_by(f64::total_cmp);
            quantile_sorted(&nonzero, 0.5)
        };
        Ok(Thermometer {
            n_raw_features: raw.n_raw_features,
            bins: 1,
            thresholds: vec![t; raw.n_raw_features],
        })
    }

    /// Builds from explicit threshold ladders (feature-major, `bins` per
    /// feature, strictly increasing within a feature).
    pub fn from_thresholds(
        n_raw_features: usize,
        bins: usize,
        thresholds: Vec<f64>,
    ) -> Result<Self> {
        if bins == 0 || thresholds.len() != n_raw_features * bins {
            return Err(TmError::Shape(format!(
                "{} thresholds do not form {} features x {} bins",
                thresholds.len(),
                n_raw_features,
                bins
            )));
        }
        for f in 0..n_raw_features {
            let ladder = &thresholds[f * bins..(f + 1) * bins];
            if ladder.windows(2).any(|w| w[0] >= w[1]) {
                return Err(TmError::Shape(format!(
                    "feature {f}: thresholds are not strictly increasing"
                )));
            }
        }
        Ok(Thermometer {
            n_raw_features,
            bins,
            thresholds,
        })
    }

    #[inline]
    pub fn n_raw_features(&self) -> usize {
        self.n_raw_features
    }

    #[inline]
    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn n_bool_features(&self) -> usize {
        self.n_raw_features * self.bins
    }

    #[inline]
    pub fn feature_thresholds(&self, f: usize) -> &[f64] {
        &self.thresholds[f * self.bins..(f + 1) * self.bins]
    }

    #[inline]
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Encodes one raw sample to `n_raw_features * bins` boolean features.
    pub fn booleanize_sample(&self, x: &[f64]) -> Result<Vec<u8>> {
        if x.len() != self.n_raw_features {
            return Err(TmError::LengthMismatch {
                expected: self.n_raw_features,
                got: x.len(),
            });
        }
        let mut bools = Vec::with_capacity(self.n_bool_features());
        for (f, &v) in x.iter().enumerate() {
            for &t in self.feature_thresholds(f) {
                bools.push((v > t) as u8);
            }
        }
        Ok(bools)
    }
}

/// Linear-interpolation quantile of an ascending-sorted sample.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Nudges duplicate ladder entries to the next representable values so the
/// sequence is strictly increasing.
fn make_strictly_increasing(ladder: &mut [f64]) {
    for i in 1..ladder.len() {
        if ladder[i] <= ladder[i - 1] {
            ladder[i] = next_up(ladder[i - 1]);
        }
    }
}

fn next_up(v: f64) -> f64 {
    // f64::next_up without the unstable-feature history: bump the bit
    // pattern toward +inf.
    if v.is_nan() || v == f64::INFINITY {
        return v;
    }
    if v == 0.0 {
        return f64::from_bits(1);
    }
    let bits = v.to_bits();
    f64::from_bits(if v > 0.0 { bits + 1 } else { bits - 1 })
}

/// Converts boolean features into a packed literal row. Without a
/// permutation the layout is the features followed by their complements;
/// with one, output position `p` holds literal `perm.order()[p]` of that
/// unpermuted vector.
pub fn emit_literals(bools: &[u8], perm: Option<&Permutation>) -> Result<PackedBits> {
    let literals = negate_extend(bools);
    match perm {
        None => Ok(pack_bits(&literals)),
        Some(p) => Ok(pack_bits(&p.gather(&literals)?)),
    }
}

/// Booleanizes and packs a whole raw dataset.
pub fn booleanize_dataset(
    raw: &RawDataset,
    th: &Thermometer,
    perm: Option<&Permutation>,
) -> Result<BoolDataset> {
    let mut samples = Vec::with_capacity(raw.n_samples());
    for i in 0..raw.n_samples() {
        let bools = th.booleanize_sample(raw.sample(i))?;
        samples.push(emit_literals(&bools, perm)?);
    }
    BoolDataset::new(
        th.n_bool_features(),
        samples,
        raw.labels.clone(),
        perm.map(|p| p.fingerprint()),
    )
}

/// Reads a headerless numeric CSV. `label_column` selects the class
/// column (default: the last column); every other column is a feature.
/// Labels must be non-negative integers.
pub fn ingest_csv(path: &Path, label_column: Option<usize>) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n_raw_features = None;

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(TmError::CsvCell {
                row,
                col: 0,
                msg: format!("expected at least 2 columns, got {}", record.len()),
            });
        }
        let label_col = label_column.unwrap_or(record.len() - 1);
        if label_col >= record.len() {
            return Err(TmError::CsvCell {
                row,
                col: label_col,
                msg: format!("label column {label_col} out of range"),
            });
        }
        let width = record.len() - 1;
        match n_raw_features {
            None => n_raw_features = Some(width),
            Some(w) if w != width => {
                return Err(TmError::CsvCell {
                    row,
                    col: 0,
                    msg: format!("expected {w} feature columns, got {width}"),
                });
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            if col == label_col {
                let label: f64 = parse_cell(cell, row, col)?;
                if label < 0.0 || label.fract() != 0.0 || label > u32::MAX as f64 {
                    return Err(TmError::CsvCell {
                        row,
                        col,
                        msg: format!("label {cell:?} is not a non-negative integer"),
                    });
                }
                labels.push(label as u32);
            } else {
                values.push(parse_cell(cell, row, col)?);
            }
        }
    }

    match n_raw_features {
        None => Err(TmError::EmptyDataset),
        Some(w) => RawDataset::new(w, values, labels),
    }
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| TmError::CsvCell {
        row,
        col,
        msg: format!("cannot parse {cell:?} as a number"),
    })
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads an IDX image/label file pair (the MNIST container format:
/// big-endian headers, unsigned-byte payloads). Gzip-compressed files are
/// detected by their magic bytes and inflated transparently.
pub fn ingest_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset> {
    let images = read_maybe_gz(images_path)?;
    let labels = read_maybe_gz(labels_path)?;

    let mut ic = IdxCursor::new(&images);
    let magic = ic.read_u32_be("image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(TmError::IdxMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let n_images = ic.read_u32_be("image count")? as usize;
    let rows = ic.read_u32_be("image rows")? as usize;
    let cols = ic.read_u32_be("image cols")? as usize;
    let n_pixels = rows * cols;
    let pixel_bytes = ic.read_bytes(n_images * n_pixels, "image pixels")?;

    let mut lc = IdxCursor::new(&labels);
    let magic = lc.read_u32_be("label magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(TmError::IdxMagic {
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let n_labels = lc.read_u32_be("label count")? as usize;
    if n_labels != n_images {
        return Err(TmError::Shape(format!(
            "{n_images} images but {n_labels} labels"
        )));
    }
    let label_bytes = lc.read_bytes(n_labels, "labels")?;

    RawDataset::new(
        n_pixels,
        pixel_bytes.iter().map(|&b| b as f64).collect(),
        label_bytes.iter().map(|&b| b as u32).collect(),
    )
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut head = [0u8; 2];
    let mut file = BufReader::new(File::open(path)?);
    let n = file.read(&mut head)?;
    let mut raw = head[..n].to_vec();
    file.read_to_end(&mut raw)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct IdxCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> IdxCursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        IdxCursor { data, pos: 0 }
    }

    fn read_u32_be(&mut self, what: &'static str) -> Result<u32> {
        let bytes = self.read_bytes(4, what)?;
        Ok(u32::from_be_bytes(bytes.try_into().unwrap()))
    }

    fn read_bytes(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(TmError::Truncated(what));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}
