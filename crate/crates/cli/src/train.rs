//! train, finetune and benchmark.

use std::path::{Path, PathBuf};
use std::time::Instant;

use drbn_core::inference::{train_inference_net, CaConfig, MapSource, DEFAULT_ENUMERATION_CAP};
use drbn_core::io::{save_model, save_net, write_atomic, write_trace_csv};
use drbn_core::learning::{exact_mean_log_likelihood, max_mean_log_likelihood};
use drbn_core::{
    finetune_global, finetune_supervised, fit_exact_tiny, fit_rbn_unsupervised,
    fit_variational_baseline, pretrain_layerwise, DataBatch, LearnTrace, MStep, ModelParams,
    TrainConfig,
};
use serde::Deserialize;

use crate::args::{BenchmarkArgs, FinetuneArgs, Method, TrainArgs};
use crate::data::{load_data, model, read_config};
use crate::{CmdResult, Failure};

/// Training configuration file: a [`TrainConfig`] plus the architecture.
#[derive(Deserialize, Debug, Default)]
#[serde(default)]
struct RunConfig {
    /// Latent layer sizes, bottom first.
    hidden_sizes: Vec<usize>,
    /// Side of square patches sampled from PGM images; unset uses whole
    /// images or IDX items.
    patch_size: Option<usize>,
    /// Fine-tuning epochs; defaults to `epochs`.
    finetune_epochs: Option<usize>,
    #[serde(flatten)]
    train: TrainConfig,
}

fn trace_path(out: &Path, trace: Option<PathBuf>) -> PathBuf {
    trace.unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".trace.csv");
        PathBuf::from(s)
    })
}

fn with_seed(mut cfg: TrainConfig, seed: Option<u64>) -> TrainConfig {
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.ca_cfg.seed = s;
        cfg.net.seed = s;
    }
    cfg
}

fn summary(trace: &LearnTrace) -> String {
    match (trace.first(), trace.last()) {
        (Some(a), Some(b)) => format!("objective {a:.4} -> {b:.4} over {} epochs", trace.epochs.len()),
        _ => "no epochs run".into(),
    }
}

pub fn train(args: TrainArgs, seed: Option<u64>) -> CmdResult {
    let run: RunConfig = read_config(&args.config)?;
    if run.hidden_sizes.is_empty() || run.hidden_sizes.contains(&0) {
        return Err(Failure::config("config needs non-empty, positive hidden_sizes"));
    }
    let cfg = with_seed(run.train, seed);
    cfg.validate()?;
    let kind = cfg.m_step.visible_kind();
    let data = load_data(&args.data, kind, run.patch_size.map(|p| p * p), cfg.seed)?;
    let mut sizes = vec![data.dim()];
    sizes.extend(&run.hidden_sizes);

    let (params, mut trace) = pretrain_layerwise(&data, &sizes, &cfg)?;
    let ft_cfg = TrainConfig {
        epochs: run.finetune_epochs.unwrap_or(cfg.epochs),
        ..cfg.clone()
    };
    let (mut params, ft) = if ft_cfg.epochs > 0 {
        finetune_global(&params, &data, &ft_cfg)?
    } else {
        (params, LearnTrace::default())
    };
    trace.append(ft);
    if data.labels.is_some() && ft_cfg.epochs > 0 {
        let (p, sup) = finetune_supervised(&params, &data, &ft_cfg)?;
        params = p;
        trace.append(sup);
    }
    save_model(&args.out, &params)?;
    let trace_out = trace_path(&args.out, args.trace);
    write_trace_csv(&trace_out, &trace, args.timing)?;
    if let Some(path) = &args.net_out {
        let net_cfg = cfg.net.clone();
        let (net, _) = train_inference_net(&params, &data, &net_cfg)?;
        save_net(path, &net)?;
    }
    println!(
        "trained {sizes:?} {} model on {} vectors: {}; wrote {} and {}",
        kind,
        data.len(),
        summary(&trace),
        args.out.display(),
        trace_out.display()
    );
    Ok(())
}

pub fn finetune(args: FinetuneArgs, seed: Option<u64>) -> CmdResult {
    let params = model(&args.model)?;
    let cfg = with_seed(read_config::<TrainConfig>(&args.config)?, seed);
    cfg.validate()?;
    let data = load_data(&args.data, params.visible_kind, Some(params.n_visible()), cfg.seed)?;
    let (params, trace) = if data.labels.is_some() {
        finetune_supervised(&params, &data, &cfg)?
    } else {
        finetune_global(&params, &data, &cfg)?
    };
    save_model(&args.out, &params)?;
    let trace_out = trace_path(&args.out, args.trace);
    write_trace_csv(&trace_out, &trace, args.timing)?;
    println!(
        "{} fine-tuning on {} vectors: {}; wrote {}",
        if data.labels.is_some() { "supervised" } else { "global" },
        data.len(),
        summary(&trace),
        args.out.display()
    );
    Ok(())
}

/// Largest latent layer whose learned model is scored by exact enumeration;
/// larger ones use the max-approximated likelihood.
pub const EXACT_EVAL_CAP: usize = 12;

/// Shared budget when no config is given.
fn benchmark_budget() -> TrainConfig {
    TrainConfig {
        epochs: 30,
        batch_size: 20,
        lr: 0.1,
        convergence_tol: 0.0,
        ..TrainConfig::default()
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Exact => "exact",
        Method::Maxmax => "maxmax",
        Method::Variational => "variational",
    }
}

fn evaluate(params: &ModelParams, data: &DataBatch, seed: u64) -> Result<(&'static str, f64), Failure> {
    if params.total_latent() <= EXACT_EVAL_CAP {
        Ok(("exact", exact_mean_log_likelihood(params, data)?))
    } else {
        let cfg = CaConfig {
            restarts: 5,
            seed,
            ..CaConfig::default()
        };
        Ok(("max", max_mean_log_likelihood(params, data, &MapSource::Ca(cfg))?))
    }
}

pub fn benchmark(args: BenchmarkArgs, seed: Option<u64>) -> CmdResult {
    if args.methods.is_empty() {
        return Err(Failure::config("--methods is empty"));
    }
    if args.hidden_sizes.is_empty() || args.hidden_sizes.contains(&0) {
        return Err(Failure::config("--hidden-sizes needs positive sizes"));
    }
    if args.methods.contains(&Method::Exact) {
        if let Some(&n) = args.hidden_sizes.iter().find(|&&n| n > DEFAULT_ENUMERATION_CAP) {
            return Err(Failure::config(format!(
                "exact learning with {n} hidden units exceeds the enumeration cap of {DEFAULT_ENUMERATION_CAP}"
            )));
        }
    }
    let base = match &args.config {
        Some(path) => read_config(path)?,
        None => benchmark_budget(),
    };
    let cfg = with_seed(base, seed);
    cfg.validate()?;
    if cfg.m_step != MStep::SgdBinary {
        return Err(Failure::config("benchmark trains binary models; m_step must be sgd_binary"));
    }
    let data = load_data(&args.data, cfg.m_step.visible_kind(), None, cfg.seed)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["n_h", "method", "seed", "evaluation", "loglik"];
    if args.timing {
        header.push("seconds");
    }
    w.write_record(&header).map_err(csv_failure)?;
    for &n_h in &args.hidden_sizes {
        let sizes = [data.dim(), n_h];
        for &method in &args.methods {
            let started = Instant::now();
            let (params, _) = match method {
                Method::Exact => fit_exact_tiny(&data, &sizes, &cfg)?,
                Method::Maxmax => fit_rbn_unsupervised(&data, &sizes, &cfg)?,
                Method::Variational => fit_variational_baseline(&data, &sizes, &cfg)?,
            };
            let (evaluation, ll) = evaluate(&params, &data, cfg.seed)?;
            let seconds = started.elapsed().as_secs_f64();
            log::info!("n_h {n_h} {}: {ll:.4} ({evaluation}, {seconds:.1}s)", method_name(method));
            let mut row = vec![
                n_h.to_string(),
                method_name(method).to_string(),
                cfg.seed.to_string(),
                evaluation.to_string(),
                ll.to_string(),
            ];
            if args.timing {
                row.push(format!("{seconds:.3}"));
            }
            w.write_record(&row).map_err(csv_failure)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure { code: 3, message: e.to_string() })?;
    write_atomic(&args.out, &bytes)?;
    println!(
        "benchmarked {} methods over hidden sizes {:?} on {} vectors; wrote {}",
        args.methods.len(),
        args.hidden_sizes,
        data.len(),
        args.out.display()
    );
    Ok(())
}

pub fn csv_failure(e: csv::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("csv encoding: {e}"),
    }
}
