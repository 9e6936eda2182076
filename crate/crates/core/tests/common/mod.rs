//! Shared fixtures for the integration and acceptance suites.
//!
//! Two datasets back the suites:
//!
//! * Iris (the bundled CSV fixture), booleanized with a 12-bin
//!   thermometer: 48 boolean features, 96 literals.
//! * A 28x28 handwritten-digit set at the 784-feature / 1568-literal /
//!   10-class scale: real MNIST when `TM_MNIST_DIR` points at the IDX
//!   files, otherwise a surrogate built by upscaling and augmenting the
//!   bundled 8x8 UCI handwritten-digits scans (real pen strokes, same
//!   shape and sparsity profile as binarized MNIST).
//!
//! Heavy artifacts (trained models, the benchmark report) are built once
//! per process behind `OnceLock`s.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tm_core::bench::{run_bench, BenchConfig, BenchReport};
use tm_core::booleanize::{booleanize_dataset, ingest_csv, ingest_idx, RawDataset, Thermometer};
use tm_core::model::{ActionModel, BoolDataset};
use tm_core::trainer::{train, TrainerConfig};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load_iris() -> RawDataset {
    ingest_csv(&fixtures_dir().join("iris.csv"), None).expect("iris fixture")
}

pub fn load_digits_8x8() -> RawDataset {
    ingest_csv(&fixtures_dir().join("digits_8x8.csv"), None).expect("digits fixture")
}

/// Shuffled split by sample; `test_fraction` of the samples go to the
/// first returned set.
pub fn split_raw(raw: &RawDataset, test_fraction: f64, seed: u64) -> (RawDataset, RawDataset) {
    let mut idx: Vec<usize> = (0..raw.n_samples()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (raw.n_samples() as f64 * test_fraction).round() as usize;
    let (test_idx, train_idx) = idx.split_at(n_test);
    (take_samples(raw, test_idx), take_samples(raw, train_idx))
}

fn take_samples(raw: &RawDataset, ids: &[usize]) -> RawDataset {
    let mut values = Vec::with_capacity(ids.len() * raw.n_raw_features);
    let mut labels = Vec::with_capacity(ids.len());
    for &i in ids {
        values.extend_from_slice(raw.sample(i));
        labels.push(raw.labels[i]);
    }
    RawDataset::new(raw.n_raw_features, values, labels).unwrap()
}

/// 8x8 scan (intensities 0..16) to a 28x28 image: 3x nearest upscale,
/// 3x3 box blur for stroke gradients, random shift, intensity jitter.
fn upscale_augment(img8: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut big = [0f64; 24 * 24];
    for y in 0..24 {
        for x in 0..24 {
            big[y * 24 + x] = img8[(y / 3) * 8 + x / 3] * 15.0;
        }
    }
    let mut blurred = [0f64; 24 * 24];
    for y in 0..24i32 {
        for x in 0..24i32 {
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (ny, nx) = (y + dy, x + dx);
                    if (0..24).contains(&ny) && (0..24).contains(&nx) {
                        acc += big[(ny * 24 + nx) as usize];
                        cnt += 1.0;
                    }
                }
            }
            blurred[(y * 24 + x) as usize] = acc / cnt;
        }
    }
    let gain: f64 = rng.random_range(0.85..1.15);
    let dx = rng.random_range(0..=4usize);
    let dy = rng.random_range(0..=4usize);
    let mut out = vec![0f64; 28 * 28];
    for y in 0..24 {
        for x in 0..24 {
            let v = blurred[y * 24 + x] * gain * rng.random_range(0.95..1.05);
            out[(y + dy) * 28 + (x + dx)] = v.clamp(0.0, 255.0).round();
        }
    }
    out
}

fn augment_set(base: &RawDataset, ids: &[usize], n: usize, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * 784);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let i = ids[k % ids.len()];
        values.extend_from_slice(&upscale_augment(base.sample(i), &mut rng));
        labels.push(base.labels[i]);
    }
    RawDataset::new(784, values, labels).unwrap()
}

fn real_mnist(dir: &Path, n_train: usize, n_test: usize) -> Option<(RawDataset, RawDataset)> {
    let find = |stem: &str| -> Option<PathBuf> {
        for suffix in ["", ".gz"] {
            let p = dir.join(format!("{stem}{suffix}"));
            if p.exists() {
                return Some(p);
            }
        }
        None
    };
    let train = ingest_idx(
        &find("train-images-idx3-ubyte")?,
        &find("train-labels-idx1-ubyte")?,
    )
    .ok()?;
    let test = ingest_idx(
        &find("t10k-images-idx3-ubyte")?,
        &find("t10k-labels-idx1-ubyte")?,
    )
    .ok()?;
    let train_ids: Vec<usize> = (0..n_train.min(train.n_samples())).collect();
    let test_ids: Vec<usize> = (0..n_test.min(test.n_samples())).collect();
    Some((
        take_samples(&train, &train_ids),
        take_samples(&test, &test_ids),
    ))
}

/// 784-feature, 10-class image pair at the 10k/2k scale.
pub fn mnist_scale_raw(n_train: usize, n_test: usize) -> (RawDataset, RawDataset, bool) {
    if let Ok(dir) = std::env::var("TM_MNIST_DIR") {
        if let Some((train, test)) = real_mnist(Path::new(&dir), n_train, n_test) {
            return (train, test, true);
        }
        eprintln!("TM_MNIST_DIR set but IDX files not usable; falling back to the digit surrogate");
    }
    let base = load_digits_8x8();
    let mut ids: Vec<usize> = (0..base.n_samples()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
    // Hold out source scans entirely so test digits are unseen writers.
    let (test_ids, train_ids) = ids.split_at(300);
    (
        augment_set(&base, train_ids, n_train, 100),
        augment_set(&base, test_ids, n_test, 200),
        false,
    )
}

pub struct ImageFixture {
    pub train: BoolDataset,
    pub test: BoolDataset,
    pub model: ActionModel,
    pub thermometer: Thermometer,
    pub real_mnist: bool,
}

/// Digit-image fixture at MNIST scale: binary nonzero-median
/// booleanization, 100 clauses/class, (T, s) = (10, 8), seed 0.
pub fn image_fixture() -> &'static ImageFixture {
    static FIXTURE: OnceLock<ImageFixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let (train_raw, test_raw, real_mnist) = mnist_scale_raw(10_000, 2_000);
        let th = Thermometer::fit_binary_nonzero_median(&train_raw).unwrap();
        let train_data = booleanize_dataset(&train_raw, &th, None).unwrap();
        let test_data = booleanize_dataset(&test_raw, &th, None).unwrap();
        assert_eq!(train_data.n_literals(), 1568);
        let model = train(&train_data, &image_trainer_config(0)).unwrap();
        ImageFixture {
            train: train_data,
            test: test_data,
            model,
            thermometer: th,
            real_mnist,
        }
    })
}

pub fn image_trainer_config(seed: u64) -> TrainerConfig {
    let mut cfg = TrainerConfig::new(100, 10, 8.0);
    cfg.epochs = 15;
    cfg.seed = seed;
    cfg
}

pub struct IrisFixture {
    pub train: BoolDataset,
    pub test: BoolDataset,
    pub model: ActionModel,
}

/// Iris fixture: 12-bin thermometer (48 boolean features), 16
/// clauses/class, (T, s) = (8, 4), 80/20 split, seed 0.
pub fn iris_fixture() -> &'static IrisFixture {
    static FIXTURE: OnceLock<IrisFixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let (train_data, test_data) = iris_split(42);
        let model = train(&train_data, &iris_trainer_config(0)).unwrap();
        IrisFixture {
            train: train_data,
            test: test_data,
            model,
        }
    })
}

pub fn iris_split(seed: u64) -> (BoolDataset, BoolDataset) {
    let iris = load_iris();
    let (test_raw, train_raw) = split_raw(&iris, 0.2, seed);
    let th = Thermometer::fit(&train_raw, 12).unwrap();
    assert_eq!(th.n_bool_features(), 48);
    (
        booleanize_dataset(&train_raw, &th, None).unwrap(),
        booleanize_dataset(&test_raw, &th, None).unwrap(),
    )
}

pub fn iris_trainer_config(seed: u64) -> TrainerConfig {
    let mut cfg = TrainerConfig::new(16, 8, 4.0);
    cfg.epochs = 40;
    cfg.seed = seed;
    cfg
}

/// Benchmark report over the image fixture (all engines, with reorder),
/// shared by the speedup criteria.
pub fn image_bench_report() -> &'static BenchReport {
    static REPORT: OnceLock<BenchReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let fx = image_fixture();
        let cfg = BenchConfig {
            repeats: 3,
            warmup: 1,
            with_reorder: true,
            ..BenchConfig::default()
        };
        run_bench(&fx.model, &fx.test, Some(&fx.train), &cfg).unwrap()
    })
}

/// Serializes tests that must not run concurrently (timing, shared
/// fixture construction). Lock poisoning is ignored: a failed criterion
/// must not hide the others.
pub fn gate() -> MutexGuard<'static, ()> {
    static GATE: Mutex<()> = Mutex::new(());
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}
