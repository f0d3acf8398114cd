use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drbn_core::io::{read_pgm, write_pgm};
use drbn_core::restoration::{psnr, synthetic_texture};
use drbn_core::{load_model, InferenceReport};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drbn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "drbn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_digits(dir: &Path, name: &str, seed: &str) -> PathBuf {
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"hidden_sizes": [5], "epochs": 2, "batch_size": 10}"#).unwrap();
    let out = dir.join(name);
    let images = fixture("digits-images.idx3-ubyte");
    ok(&[
        "train", "--config", s(&cfg), "--data", s(&images), "--downsample", "--limit", "40",
        "--out", s(&out), "--seed", seed,
    ]);
    out
}

fn texture_prior(dir: &Path) -> PathBuf {
    let train = dir.join("train");
    std::fs::create_dir_all(&train).unwrap();
    for k in 0..3 {
        write_pgm(train.join(format!("t{k}.pgm")), &synthetic_texture(32, 32, 40 + k)).unwrap();
    }
    let cfg = dir.join("prior.json");
    std::fs::write(
        &cfg,
        r#"{"hidden_sizes": [20], "patch_size": 8, "m_step": "closed_form_gaussian", "epochs": 4, "batch_size": 100}"#,
    )
    .unwrap();
    let out = dir.join("prior.json.model");
    ok(&[
        "train", "--config", s(&cfg), "--data", s(&train), "--patch-count", "2000", "--out", s(&out),
        "--seed", "1",
    ]);
    out
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["train", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let images = fixture("digits-images.idx3-ubyte");
    let out = run(&[
        "train", "--config", s(&dir.path().join("absent.json")), "--data", s(&images),
        "--out", s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P5\n4 4\n255\nxx").unwrap();
    let out = run(&["psnr", s(&bad), s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn psnr_of_identical_images() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.pgm");
    write_pgm(&img, &synthetic_texture(16, 16, 3)).unwrap();
    assert_eq!(ok(&["psnr", s(&img), s(&img)]).trim(), "99.00");
}

#[test]
fn train_writes_loadable_model_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_digits(dir.path(), "m.json", "4");
    let params = load_model(&model).unwrap();
    assert_eq!(params.n_visible(), 196);
    let trace = std::fs::read_to_string(dir.path().join("m.json.trace.csv")).unwrap();
    assert!(trace.starts_with("epoch,objective,param_norm\n"));
}

#[test]
fn equal_seeds_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read(train_digits(dir.path(), "a.json", "9")).unwrap();
    let b = std::fs::read(train_digits(dir.path(), "b.json", "9")).unwrap();
    let c = std::fs::read(train_digits(dir.path(), "c.json", "10")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn benchmark_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let images = fixture("digits-images.idx3-ubyte");
    let out = dir.path().join("b.csv");
    let empty = run(&["benchmark", "--data", s(&images), "--hidden-sizes", "3", "--methods", "", "--out", s(&out)]);
    assert_eq!(empty.status.code(), Some(1));
    let big = run(&["benchmark", "--data", s(&images), "--hidden-sizes", "25", "--methods", "exact", "--out", s(&out)]);
    assert_eq!(big.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&big.stderr).contains("20"));
    assert!(!out.exists());
}

#[test]
fn benchmark_writes_one_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let images = fixture("digits-images.idx3-ubyte");
    let cfg = dir.path().join("b.json");
    std::fs::write(&cfg, r#"{"epochs": 1, "batch_size": 20}"#).unwrap();
    let out = dir.path().join("b.csv");
    ok(&[
        "benchmark", "--data", s(&images), "--downsample", "--limit", "40", "--hidden-sizes", "3",
        "--config", s(&cfg), "--out", s(&out), "--seed", "2",
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n_h,method,seed,evaluation,loglik");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("3,exact,2,exact,"));
}

#[test]
fn exact_inference_is_never_beaten() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_digits(dir.path(), "m.json", "3");
    let images = fixture("digits-images.idx3-ubyte");
    let mut reports = Vec::new();
    for method in ["exact", "augca", "ca"] {
        let out = dir.path().join(format!("{method}.json"));
        ok(&[
            "infer", "--model", s(&model), "--data", s(&images), "--downsample", "--limit", "15",
            "--map-method", method, "--out", s(&out), "--seed", "1",
        ]);
        let r: Vec<InferenceReport> = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
        assert_eq!(r.len(), 15);
        reports.push(r);
    }
    for other in &reports[1..] {
        for (e, o) in reports[0].iter().zip(other) {
            assert!(e.joint_log_prob >= o.joint_log_prob - 1e-9);
        }
    }
}

#[test]
fn restoration_improves_a_corrupted_texture() {
    let dir = tempfile::tempdir().unwrap();
    let model = texture_prior(dir.path());
    let clean = dir.path().join("clean.pgm");
    write_pgm(&clean, &synthetic_texture(24, 24, 77)).unwrap();
    let corrupted = dir.path().join("c.pgm");
    let mask = dir.path().join("mask.pgm");
    ok(&[
        "corrupt", "--in", s(&clean), "--noise", "gaussian:0.4:0.4", "--out", s(&corrupted),
        "--mask-out", s(&mask), "--seed", "2",
    ]);
    let restored = dir.path().join("r.pgm");
    let log = dir.path().join("hqs.csv");
    ok(&[
        "restore", "--model", s(&model), "--in", s(&corrupted), "--noise", "gaussian:0.4:0.4",
        "--mask", s(&mask), "--clean", s(&clean), "--map-method", "ca", "--out", s(&restored),
        "--log", s(&log), "--seed", "2",
    ]);
    let reference = read_pgm(&clean).unwrap();
    let before = psnr(&read_pgm(&corrupted).unwrap(), &reference).unwrap();
    let after = psnr(&read_pgm(&restored).unwrap(), &reference).unwrap();
    assert!(after - before >= 3.0, "{before:.2} dB -> {after:.2} dB");
    assert!(std::fs::read_to_string(&log).unwrap().starts_with("step,beta,objective,psnr\n"));
}

#[test]
fn generate_writes_requested_images() {
    let dir = tempfile::tempdir().unwrap();
    let model = texture_prior(dir.path());
    let out = dir.path().join("gen");
    ok(&["generate", "--model", s(&model), "--count", "4", "--out", s(&out), "--seed", "1"]);
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["sample-0000.pgm", "sample-0001.pgm", "sample-0002.pgm", "sample-0003.pgm"]);
    let img = read_pgm(out.join("sample-0000.pgm")).unwrap();
    assert_eq!((img.width, img.height), (8, 8));
}
