//! End-to-end tests of the `tm` binary: exit codes, report schemas, and
//! the full booleanize -> train -> reorder -> infer -> bench pipeline.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn tm")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tm(&["frobnicate"], dir.path());
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage") || stderr.contains("usage"), "{stderr}");
}

#[test]
fn no_arguments_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&tm(&[], dir.path())), 1);
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&tm(&["--help"], dir.path())), 0);
    assert_eq!(code(&tm(&["bench", "--help"], dir.path())), 0);
}

#[test]
fn bad_engine_value_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tm(
        &["infer", "--model", "m", "--data", "d", "--engine", "warp"],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_model_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tm(&["inspect", "--model", "nope.tmbm"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn corrupt_model_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.tmbm"), b"NOPE....").unwrap();
    let out = tm(&["inspect", "--model", "bad.tmbm"], dir.path());
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("magic"), "{stderr}");
}

#[test]
fn full_iris_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let iris = fixtures().join("iris.csv");
    let iris = iris.to_str().unwrap();

    let out = tm(
        &[
            "booleanize",
            "--input",
            iris,
            "--format",
            "csv",
            "--bins",
            "12",
            "--output",
            "iris.tmx",
            "--thermometer-out",
            "th.json",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = tm(
        &[
            "train",
            "--data",
            "iris.tmx",
            "--clauses",
            "16",
            "--T",
            "8",
            "--s",
            "4",
            "--epochs",
            "40",
            "--seed",
            "1",
            "--thermometer",
            "th.json",
            "--output",
            "iris.tmbm",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = tm(
        &[
            "reorder",
            "--model",
            "iris.tmbm",
            "--calibration",
            "iris.tmx",
            "--output",
            "iris_r.tmbm",
            "--stats",
            "stats.json",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["order"].as_array().unwrap().len(), 96);
    assert_eq!(stats["p_zero"].as_array().unwrap().len(), 96);

    // Booleanize against the reordered model: permutation + stored
    // thermometer are picked up from the model file.
    let out = tm(
        &[
            "booleanize",
            "--input",
            iris,
            "--format",
            "csv",
            "--permutation-from",
            "iris_r.tmbm",
            "--output",
            "iris_r.tmx",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // All four engines agree on accuracy.
    let mut accuracies = Vec::new();
    for engine in ["baseline", "early-exit", "bitwise", "bitwise-ee"] {
        let out = tm(
            &[
                "infer",
                "--model",
                "iris_r.tmbm",
                "--data",
                "iris_r.tmx",
                "--engine",
                engine,
                "--report",
                "report.json",
            ],
            d,
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report["n_samples"].as_u64(), Some(150));
        assert!(report.get("class_sums").is_none());
        accuracies.push(report["accuracy"].as_f64().unwrap());
    }
    assert!(accuracies.windows(2).all(|w| w[0] == w[1]), "{accuracies:?}");
    assert!(accuracies[0] > 0.85, "{accuracies:?}");

    // Verbose adds per-sample class sums.
    let out = tm(
        &[
            "infer",
            "--model",
            "iris_r.tmbm",
            "--data",
            "iris_r.tmx",
            "--engine",
            "bitwise-ee",
            "--verbose",
        ],
        d,
    );
    assert_eq!(code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["class_sums"].as_array().unwrap().len(), 150);

    // Bench over the unreordered pair, with the reordered rows derived
    // internally.
    let out = tm(
        &[
            "bench",
            "--model",
            "iris.tmbm",
            "--data",
            "iris.tmx",
            "--engines",
            "all",
            "--repeats",
            "3",
            "--warmup",
            "1",
            "--with-reorder",
            "--calibration",
            "iris.tmx",
            "--report",
            "bench.json",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("bench.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert!(report["reorder_overhead_ns"].as_u64().is_some());
    let baseline_row = rows
        .iter()
        .find(|r| r["engine"] == "baseline" && r["reordered"] == false)
        .unwrap();
    assert_eq!(
        baseline_row["time_reduction_percent_vs_baseline"].as_f64(),
        Some(0.0)
    );

    // Inspect, text and JSON forms.
    let out = tm(&["inspect", "--model", "iris_r.tmbm"], d);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("3 classes × 16 clauses × 96 literals (3 words/row)"));
    assert!(text.contains("permutation: present"));

    let out = tm(&["inspect", "--model", "iris_r.tmbm", "--json"], d);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["n_classes"].as_u64(), Some(3));
    assert_eq!(summary["words_per_row"].as_u64(), Some(3));
}

#[test]
fn bench_rejects_mismatched_permutation_pair() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let iris = fixtures().join("iris.csv");
    let iris = iris.to_str().unwrap();

    assert_eq!(
        code(&tm(
            &["booleanize", "--input", iris, "--format", "csv", "--bins", "4", "--output", "a.tmx"],
            d
        )),
        0
    );
    assert_eq!(
        code(&tm(
            &[
                "train", "--data", "a.tmx", "--clauses", "4", "--T", "2", "--s", "3", "--epochs",
                "2", "--output", "m.tmbm"
            ],
            d
        )),
        0
    );
    assert_eq!(
        code(&tm(
            &["reorder", "--model", "m.tmbm", "--calibration", "a.tmx", "--output", "mr.tmbm"],
            d
        )),
        0
    );
    assert_eq!(
        code(&tm(
            &[
                "booleanize", "--input", iris, "--format", "csv", "--bins", "4",
                "--permutation-from", "mr.tmbm", "--output", "ar.tmx"
            ],
            d
        )),
        0
    );

    // Permuted data against the unpermuted model: data error.
    let out = tm(
        &["bench", "--model", "m.tmbm", "--data", "ar.tmx", "--repeats", "1", "--warmup", "0"],
        d,
    );
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("permutation"));
}

#[test]
fn booleanize_idx_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // Two 2x2 "images".
    let mut img = std::fs::File::create(d.join("imgs.idx")).unwrap();
    img.write_all(&0x0000_0803u32.to_be_bytes()).unwrap();
    img.write_all(&2u32.to_be_bytes()).unwrap();
    img.write_all(&2u32.to_be_bytes()).unwrap();
    img.write_all(&2u32.to_be_bytes()).unwrap();
    img.write_all(&[0, 200, 10, 250, 180, 0, 30, 220]).unwrap();
    let mut lab = std::fs::File::create(d.join("labs.idx")).unwrap();
    lab.write_all(&0x0000_0801u32.to_be_bytes()).unwrap();
    lab.write_all(&2u32.to_be_bytes()).unwrap();
    lab.write_all(&[0, 1]).unwrap();

    let out = tm(
        &[
            "booleanize",
            "--input",
            "imgs.idx",
            "--format",
            "idx",
            "--labels",
            "labs.idx",
            "--output",
            "d.tmx",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("2 samples x 8 literals"), "{text}");

    // idx without --labels is a usage-style config error (exit 2: the
    // arguments parsed, the configuration is invalid).
    let out = tm(
        &["booleanize", "--input", "imgs.idx", "--format", "idx", "--output", "d.tmx"],
        d,
    );
    assert_eq!(code(&out), 2);
}
