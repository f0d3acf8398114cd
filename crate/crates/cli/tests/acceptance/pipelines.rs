//! Criteria exercised end to end through the `drbn` binary.

use std::collections::BTreeMap;
use std::path::Path;

use drbn_core::io::{read_pgm, write_pgm};
use drbn_core::restoration::{psnr, synthetic_texture, text_mask};
use drbn_core::ImageGray;

use crate::harness::{drbn, fixture, median, p};
use crate::Outcome;

const SEEDS: [u64; 3] = [0, 1, 2];

fn fail(detail: String) -> Outcome {
    Outcome { pass: false, detail }
}

/// `(n_h, method) -> loglik` for every seed.
type Sweep = BTreeMap<(usize, String), Vec<f64>>;

fn run_benchmark(hidden: &str, methods: &str, dir: &Path) -> Result<Sweep, String> {
    let images = fixture("digits-images.idx3-ubyte");
    let mut sweep = Sweep::new();
    for seed in SEEDS {
        let out = dir.join(format!("bench-{seed}.csv"));
        drbn(&[
            "benchmark",
            "--data",
            p(&images),
            "--downsample",
            "--hidden-sizes",
            hidden,
            "--methods",
            methods,
            "--seed",
            &seed.to_string(),
            "--out",
            p(&out),
        ])?;
        let mut reader = csv::Reader::from_path(&out).map_err(|e| e.to_string())?;
        for row in reader.records() {
            let row = row.map_err(|e| e.to_string())?;
            let n_h: usize = row[0].parse().map_err(|_| "bad n_h".to_string())?;
            let ll: f64 = row[4].parse().map_err(|_| "bad loglik".to_string())?;
            sweep.entry((n_h, row[1].to_string())).or_default().push(ll);
        }
    }
    Ok(sweep)
}

fn med(sweep: &Sweep, n_h: usize, method: &str) -> f64 {
    median(sweep[&(n_h, method.to_string())].clone())
}

pub fn table_one_ordering() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let sweep = match run_benchmark("5", "exact,maxmax,variational", dir.path()) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let (e, m, v) = (med(&sweep, 5, "exact"), med(&sweep, 5, "maxmax"), med(&sweep, 5, "variational"));
    Outcome {
        pass: e >= m && m >= v && e - m < 2.0 && m - v > 2.0,
        detail: format!(
            "median exact log-likelihood: exact {e:.3}, maxmax {m:.3}, variational {v:.3}; exact-maxmax {:.3} (< 2), maxmax-variational {:.3} (> 2)",
            e - m,
            m - v
        ),
    }
}

pub fn hidden_size_sweep() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let sweep = match run_benchmark("5,10,15,20", "maxmax,variational", dir.path()) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let mut pass = true;
    let mut points = Vec::new();
    for n_h in [5, 10, 15, 20] {
        let (m, v) = (med(&sweep, n_h, "maxmax"), med(&sweep, n_h, "variational"));
        pass &= m >= v;
        points.push(format!("n_h {n_h}: {m:.2} vs {v:.2}"));
    }
    Outcome {
        pass,
        detail: format!("median maxmax vs variational ({})", points.join("; ")),
    }
}

fn write_textures(dir: &Path, count: usize, size: usize, seed0: u64) -> Vec<ImageGray> {
    std::fs::create_dir_all(dir).unwrap();
    (0..count)
        .map(|k| {
            let img = synthetic_texture(size, size, seed0 + k as u64);
            write_pgm(dir.join(format!("texture-{k:02}.pgm")), &img).unwrap();
            // Compare against what was stored, after 8-bit quantization.
            read_pgm(dir.join(format!("texture-{k:02}.pgm"))).unwrap()
        })
        .collect()
}

fn train_prior(dir: &Path, hidden: &str, epochs: usize, patches: usize) -> Result<(), String> {
    let config = dir.join("prior.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"hidden_sizes": {hidden}, "patch_size": 8, "m_step": "closed_form_gaussian",
                "epochs": {epochs}, "finetune_epochs": {epochs}, "lr": 0.05, "batch_size": 100}}"#
        ),
    )
    .unwrap();
    drbn(&[
        "train",
        "--config",
        p(&config),
        "--data",
        p(&dir.join("train")),
        "--patch-count",
        &patches.to_string(),
        "--out",
        p(&dir.join("prior-model.json")),
        "--net-out",
        p(&dir.join("prior.net.json")),
        "--seed",
        "7",
    ])?;
    Ok(())
}

pub fn restoration_direction() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_textures(&dir.join("train"), 8, 48, 100);
    let tests = write_textures(&dir.join("test"), 3, 32, 200);
    if let Err(e) = train_prior(dir, "[50, 50]", 8, 5000) {
        return fail(e);
    }
    let model = dir.join("prior-model.json");
    let net = dir.join("prior.net.json");
    let text = ImageGray::new(32, 32, text_mask(32, 32, "DRBN", 2).iter().map(|&m| f64::from(m)).collect()).unwrap();
    write_pgm(dir.join("text.pgm"), &text).unwrap();
    let text_spec = format!("text:{}", p(&dir.join("text.pgm")));

    let mut min_gain = f64::INFINITY;
    let mut means = BTreeMap::<&str, Vec<f64>>::new();
    for (k, clean) in tests.iter().enumerate() {
        let clean_path = dir.join(format!("test/texture-{k:02}.pgm"));
        for (name, noise) in [("text", text_spec.as_str()), ("gaussian", "gaussian:0.4:0.4")] {
            let corrupted = dir.join(format!("c-{k}-{name}.pgm"));
            let mask = dir.join(format!("m-{k}-{name}.pgm"));
            let step = drbn(&[
                "corrupt", "--in", p(&clean_path), "--noise", noise, "--out", p(&corrupted),
                "--mask-out", p(&mask), "--seed", &k.to_string(),
            ]);
            if let Err(e) = step {
                return fail(e);
            }
            let before = psnr(&read_pgm(&corrupted).unwrap(), clean).unwrap();
            for method in ["ca", "augca"] {
                let out = dir.join(format!("r-{k}-{name}-{method}.pgm"));
                let step = drbn(&[
                    "restore", "--model", p(&model), "--net", p(&net), "--in", p(&corrupted),
                    "--noise", noise, "--mask", p(&mask), "--map-method", method, "--out", p(&out),
                    "--seed", "3",
                ]);
                if let Err(e) = step {
                    return fail(e);
                }
                let after = psnr(&read_pgm(&out).unwrap(), clean).unwrap();
                min_gain = min_gain.min(after - before);
                means.entry(method).or_default().push(after);
            }
        }
    }
    let mean = |m: &str| means[m].iter().sum::<f64>() / means[m].len() as f64;
    let (ca, aug) = (mean("ca"), mean("augca"));
    Outcome {
        pass: min_gain >= 3.0 && aug >= ca,
        detail: format!(
            "[64, 50, 50] prior, 3 images x 2 corruptions: smallest PSNR gain {min_gain:.2} dB (need 3); mean PSNR augca {aug:.2} dB vs ca {ca:.2} dB"
        ),
    }
}

/// Every seeded command, run twice into separate directories.
fn pipeline(dir: &Path) -> Result<(), String> {
    let images = fixture("digits-images.idx3-ubyte");
    let labels = fixture("digits-labels.idx1-ubyte");
    let data = [
        "--data", p(&images), "--labels", p(&labels), "--downsample", "--limit", "120",
    ];
    let cfg = dir.join("train.json");
    std::fs::write(&cfg, r#"{"hidden_sizes": [6, 4], "epochs": 2, "batch_size": 20}"#).unwrap();
    let run = |args: &[&str]| drbn(args).map(|_| ());
    let with = |head: &[&str], tail: &[&str]| -> Vec<String> {
        head.iter().chain(tail).map(|s| s.to_string()).collect()
    };
    let call = |v: Vec<String>| run(&v.iter().map(String::as_str).collect::<Vec<_>>());

    call(with(
        &["train", "--config", p(&cfg), "--out", p(&dir.join("m.json")), "--net-out", p(&dir.join("n.json")), "--seed", "5"],
        &data,
    ))?;
    let ft = dir.join("ft.json");
    std::fs::write(&ft, r#"{"epochs": 2, "batch_size": 20}"#).unwrap();
    call(with(
        &["finetune", "--model", p(&dir.join("m.json")), "--config", p(&ft), "--out", p(&dir.join("s.json")), "--seed", "5"],
        &data,
    ))?;
    call(with(
        &["classify", "--model", p(&dir.join("s.json")), "--out", p(&dir.join("classes.csv")), "--seed", "5"],
        &data,
    ))?;
    for method in ["ca", "in", "augca", "exact"] {
        let out = dir.join(format!("infer-{method}.json"));
        call(with(
            &["infer", "--model", p(&dir.join("m.json")), "--map-method", method, "--out", p(&out), "--seed", "5"],
            &data,
        ))?;
    }
    call(with(
        &["loglik", "--model", p(&dir.join("m.json")), "--map-method", "exact", "--out", p(&dir.join("ll.csv")), "--seed", "5"],
        &data,
    ))?;
    let bcfg = dir.join("bench.json");
    std::fs::write(&bcfg, r#"{"epochs": 2, "batch_size": 20}"#).unwrap();
    run(&[
        "benchmark", "--data", p(&images), "--downsample", "--limit", "100", "--hidden-sizes", "3,4",
        "--config", p(&bcfg), "--out", p(&dir.join("bench.csv")), "--seed", "5",
    ])?;

    write_textures(&dir.join("train"), 2, 24, 300);
    train_prior(dir, "[12]", 2, 500)?;
    let clean = dir.join("train/texture-00.pgm");
    let model = dir.join("prior-model.json");
    run(&[
        "corrupt", "--in", p(&clean), "--noise", "gaussian:0.4:0.4", "--out", p(&dir.join("c.pgm")),
        "--mask-out", p(&dir.join("mask.pgm")), "--seed", "5",
    ])?;
    run(&[
        "restore", "--model", p(&model), "--in", p(&dir.join("c.pgm")), "--noise", "gaussian:0.4:0.4",
        "--mask", p(&dir.join("mask.pgm")), "--clean", p(&clean), "--out", p(&dir.join("r.pgm")),
        "--log", p(&dir.join("hqs.csv")), "--seed", "5",
    ])?;
    run(&["reconstruct", "--model", p(&model), "--in", p(&clean), "--stride", "4", "--out", p(&dir.join("rec.pgm")), "--seed", "5"])?;
    run(&["generate", "--model", p(&model), "--count", "3", "--out", p(&dir.join("gen")), "--seed", "5"])?;
    Ok(())
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        out.insert(rel, std::fs::read(&entry).unwrap());
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut all = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            all.extend(walk(&path));
        } else {
            all.push(path);
        }
    }
    all
}

pub fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        if let Err(e) = pipeline(dir) {
            return fail(e);
        }
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    Outcome {
        pass: differing.is_empty() && fa.len() == fb.len(),
        detail: if differing.is_empty() {
            format!("{} output files byte-identical across two runs of every seeded command", fa.len())
        } else {
            format!("outputs differ: {differing:?}")
        },
    }
}
