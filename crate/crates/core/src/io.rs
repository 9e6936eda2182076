//! Bit-exact binary file formats for models (`.tmbm`) and booleanized
//! datasets (`.tmx`).
//!
//! Model file layout (all multi-byte fields little-endian):
//!
//! ```text
//! "TMBM" | version u8 | word_width u8 (=32) | reserved u16
//! n_bool_features u32 | n_classes u32 | clauses_per_class u32
//! flags u32            bit0 = permutation present, bit1 = thermometer present
//! [permutation]        n_literals x u32 position indices
//! nonempty bitmap      ceil(n_classes*clauses_per_class / 32) x u32
//! action rows          class-major then clause, words_per_row x u32 each
//! [thermometer]        n_raw_features u32 | bins u32 | thresholds f64 each
//! ```
//!
//! Dataset file layout:
//!
//! ```text
//! "TMBX" | version u8 | word_width u8 (=32) | reserved u16
//! n_samples u32 | n_bool_features u32
//! flags u32            bit0 = permuted
//! [fingerprint u64]    permutation fingerprint when bit0 is set
//! per sample           label u32 | words_per_row x u32 literal words
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bits::{word_count, PackedBits};
use crate::booleanize::Thermometer;
use crate::error::{Result, TmError};
use crate::model::{ActionModel, BoolDataset, ModelShape};
use crate::reorder::Permutation;

pub const MODEL_MAGIC: [u8; 4] = *b"TMBM";
pub const DATASET_MAGIC: [u8; 4] = *b"TMBX";
pub const FORMAT_VERSION: u8 = 1;
pub const WORD_WIDTH: u8 = 32;

const FLAG_PERMUTATION: u32 = 1 << 0;
const FLAG_THERMOMETER: u32 = 1 << 1;
const FLAG_DATASET_PERMUTED: u32 = 1 << 0;

/// FNV-1a over a byte stream; used for model/dataset file fingerprints in
/// benchmark reports.
pub fn fingerprint_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn write_model<W: Write>(model: &ActionModel, sink: &mut W) -> Result<()> {
    let shape = model.shape();
    sink.write_all(&MODEL_MAGIC)?;
    sink.write_all(&[FORMAT_VERSION, WORD_WIDTH, 0, 0])?;
    write_u32(sink, shape.n_bool_features as u32)?;
    write_u32(sink, shape.n_classes as u32)?;
    write_u32(sink, shape.clauses_per_class as u32)?;

    let mut flags = 0u32;
    if model.permutation().is_some() {
        flags |= FLAG_PERMUTATION;
    }
    if model.thermometer().is_some() {
        flags |= FLAG_THERMOMETER;
    }
    write_u32(sink, flags)?;

    if let Some(perm) = model.permutation() {
        for &o in perm.order() {
            write_u32(sink, o)?;
        }
    }

    for word in nonempty_bitmap(model.nonempty_flags()) {
        write_u32(sink, word)?;
    }

    for row in model.rows() {
        for &w in row.words() {
            write_u32(sink, w)?;
        }
    }

    if let Some(th) = model.thermometer() {
        write_u32(sink, th.n_raw_features() as u32)?;
        write_u32(sink, th.bins() as u32)?;
        for &t in th.thresholds() {
            sink.write_all(&t.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model<R: Read>(source: &mut R) -> Result<ActionModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut c = Cursor::new(&bytes);

    let magic = c.take::<4>("magic")?;
    if magic != MODEL_MAGIC {
        return Err(TmError::BadMagic {
            expected: MODEL_MAGIC,
            found: magic,
        });
    }
    let header = c.take::<4>("header")?;
    if header[0] != FORMAT_VERSION {
        return Err(TmError::VersionMismatch {
            expected: FORMAT_VERSION,
            found: header[0],
        });
    }
    if header[1] != WORD_WIDTH {
        return Err(TmError::Shape(format!(
            "unsupported word width {} (expected {WORD_WIDTH})",
            header[1]
        )));
    }

    let shape = ModelShape {
        n_bool_features: c.u32("n_bool_features")? as usize,
        n_classes: c.u32("n_classes")? as usize,
        clauses_per_class: c.u32("clauses_per_class")? as usize,
    };
    let flags = c.u32("flags")?;
    if flags & !(FLAG_PERMUTATION | FLAG_THERMOMETER) != 0 {
        return Err(TmError::Shape(format!("unknown flag bits {flags:#010x}")));
    }

    let permutation = if flags & FLAG_PERMUTATION != 0 {
        let mut order = Vec::with_capacity(shape.n_literals());
        for _ in 0..shape.n_literals() {
            order.push(c.u32("permutation index")?);
        }
        Some(Permutation::new(order)?)
    } else {
        None
    };

    let n_rows = shape.n_clauses_total();
    let mut nonempty = Vec::with_capacity(n_rows);
    for _ in 0..word_count(n_rows) {
        let word = c.u32("nonempty bitmap")?;
        for b in 0..32 {
            if nonempty.len() < n_rows {
                nonempty.push((word >> b) & 1 == 1);
            } else if (word >> b) & 1 == 1 {
                return Err(TmError::Shape(
                    "nonzero padding in nonempty bitmap".into(),
                ));
            }
        }
    }

    let words_per_row = shape.words_per_row();
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let mut words = Vec::with_capacity(words_per_row);
        for _ in 0..words_per_row {
            words.push(c.u32("action row")?);
        }
        rows.push(PackedBits::from_words(words, shape.n_literals())?);
    }

    let thermometer = if flags & FLAG_THERMOMETER != 0 {
        let n_raw = c.u32("thermometer feature count")? as usize;
        let bins = c.u32("thermometer bins")? as usize;
        let mut thresholds = Vec::with_capacity(n_raw * bins);
        for _ in 0..n_raw * bins {
            thresholds.push(f64::from_le_bytes(c.take::<8>("thermometer threshold")?));
        }
        Some(Thermometer::from_thresholds(n_raw, bins, thresholds)?)
    } else {
        None
    };

    c.expect_end()?;
    ActionModel::from_parts(shape, rows, nonempty, permutation, thermometer)
}

pub fn write_dataset<W: Write>(data: &BoolDataset, sink: &mut W) -> Result<()> {
    sink.write_all(&DATASET_MAGIC)?;
    sink.write_all(&[FORMAT_VERSION, WORD_WIDTH, 0, 0])?;
    write_u32(sink, data.n_samples() as u32)?;
    write_u32(sink, data.n_bool_features() as u32)?;
    let flags = if data.permuted_with().is_some() {
        FLAG_DATASET_PERMUTED
    } else {
        0
    };
    write_u32(sink, flags)?;
    if let Some(fp) = data.permuted_with() {
        sink.write_all(&fp.to_le_bytes())?;
    }
    for i in 0..data.n_samples() {
        write_u32(sink, data.label(i))?;
        for &w in data.sample(i).words() {
            write_u32(sink, w)?;
        }
    }
    Ok(())
}

pub fn read_dataset<R: Read>(source: &mut R) -> Result<BoolDataset> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut c = Cursor::new(&bytes);

    let magic = c.take::<4>("magic")?;
    if magic != DATASET_MAGIC {
        return Err(TmError::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        });
    }
    let header = c.take::<4>("header")?;
    if header[0] != FORMAT_VERSION {
        return Err(TmError::VersionMismatch {
            expected: FORMAT_VERSION,
            found: header[0],
        });
    }
    if header[1] != WORD_WIDTH {
        return Err(TmError::Shape(format!(
            "unsupported word width {} (expected {WORD_WIDTH})",
            header[1]
        )));
    }

    let n_samples = c.u32("n_samples")? as usize;
    let n_bool_features = c.u32("n_bool_features")? as usize;
    let flags = c.u32("flags")?;
    if flags & !FLAG_DATASET_PERMUTED != 0 {
        return Err(TmError::Shape(format!("unknown flag bits {flags:#010x}")));
    }
    let permuted_with = if flags & FLAG_DATASET_PERMUTED != 0 {
        Some(u64::from_le_bytes(c.take::<8>("fingerprint")?))
    } else {
        None
    };

    let n_literals = 2 * n_bool_features;
    let words_per_row = word_count(n_literals);
    let mut samples = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        labels.push(c.u32("label")?);
        let mut words = Vec::with_capacity(words_per_row);
        for _ in 0..words_per_row {
            words.push(c.u32("sample row")?);
        }
        samples.push(PackedBits::from_words(words, n_literals)?);
    }

    c.expect_end()?;
    BoolDataset::new(n_bool_features, samples, labels, permuted_with)
}

pub fn write_model_file(model: &ActionModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_model_file(path: &Path) -> Result<ActionModel> {
    read_model(&mut BufReader::new(File::open(path)?))
}

pub fn write_dataset_file(data: &BoolDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(data, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset_file(path: &Path) -> Result<BoolDataset> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}

/// Serializes a model to memory; handy for fingerprints and tests.
pub fn model_to_bytes(model: &ActionModel) -> Vec<u8> {
    let mut out = Vec::new();
    write_model(model, &mut out).expect("in-memory write cannot fail");
    out
}

/// Serializes a dataset to memory.
pub fn dataset_to_bytes(data: &BoolDataset) -> Vec<u8> {
    let mut out = Vec::new();
    write_dataset(data, &mut out).expect("in-memory write cannot fail");
    out
}

fn nonempty_bitmap(flags: &[bool]) -> Vec<u32> {
    let mut words = vec![0u32; word_count(flags.len())];
    for (i, &f) in flags.iter().enumerate() {
        if f {
            words[i / 32] |= 1 << (i % 32);
        }
    }
    words
}

#[inline]
fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn take<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        if self.pos + N > self.data.len() {
            return Err(TmError::Truncated(what));
        }
        let out: [u8; N] = self.data[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        Ok(out)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take::<4>(what)?))
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(TmError::Shape(format!(
                "{} trailing bytes after payload",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}
