//! classify, infer and loglik.

use drbn_core::inference::{exact_marginal, map_inference, InferenceReport};
use drbn_core::io::write_atomic;
use drbn_core::learning::classify_batch;
use drbn_core::rng::stream_id;
use drbn_core::{DataBatch, MapSource, ModelParams};
use rayon::prelude::*;

use crate::args::{ClassifyArgs, InferArgs, LoglikArgs, MapMethod};
use crate::data::{ca_config, load_data, map_source, model, net_for};
use crate::train::csv_failure;
use crate::{CmdResult, Failure};

fn query_data(args: &crate::args::DataArgs, params: &ModelParams, seed: u64) -> Result<DataBatch, Failure> {
    let data = load_data(args, params.visible_kind, Some(params.n_visible()), seed)?;
    if data.is_empty() {
        return Err(Failure::data("no data vectors"));
    }
    Ok(data)
}

/// Gives each row its own coordinate-ascent seed so results do not depend
/// on scheduling.
fn row_source<'a>(source: &MapSource<'a>, m: usize) -> MapSource<'a> {
    match source {
        MapSource::Ca(cfg) => MapSource::Ca(cfg.with_seed(stream_id(&[cfg.seed, m as u64]))),
        MapSource::AugCa { net, cfg } => MapSource::AugCa {
            net,
            cfg: cfg.with_seed(stream_id(&[cfg.seed, m as u64])),
        },
        MapSource::Exact => MapSource::Exact,
    }
}

pub fn classify(args: ClassifyArgs, seed: u64) -> CmdResult {
    let params = model(&args.model)?;
    if params.label_head.is_none() {
        return Err(Failure::config("model has no label head; fine-tune it with labels first"));
    }
    let data = query_data(&args.data, &params, seed)?;
    let net = match args.inference.map_method {
        MapMethod::Ca => None,
        MapMethod::Augca => net_for(&args.inference, &params, seed)?,
        other => return Err(Failure::config(format!("classify supports ca and augca, not {other:?}"))),
    };
    let cfg = ca_config(&args.inference, seed);
    cfg.validate()?;
    let predicted = classify_batch(&data, &params, net.as_ref(), &cfg)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let labelled = data.labels.as_ref();
    let mut header = vec!["index", "predicted"];
    if labelled.is_some() {
        header.push("label");
    }
    w.write_record(&header).map_err(csv_failure)?;
    let mut correct = 0;
    for (m, y) in predicted.iter().enumerate() {
        let mut row = vec![m.to_string(), y.to_string()];
        if let Some(labels) = labelled {
            row.push(labels[m].to_string());
            correct += usize::from(labels[m] == *y);
        }
        w.write_record(&row).map_err(csv_failure)?;
    }
    write_atomic(&args.out, &w.into_inner().map_err(|e| Failure::data(e.to_string()))?)?;
    match labelled {
        Some(_) => println!(
            "classified {} vectors: accuracy {:.4}; wrote {}",
            data.len(),
            correct as f64 / data.len() as f64,
            args.out.display()
        ),
        None => println!("classified {} vectors; wrote {}", data.len(), args.out.display()),
    }
    Ok(())
}

pub fn infer(args: InferArgs, seed: u64) -> CmdResult {
    let params = model(&args.model)?;
    let data = query_data(&args.data, &params, seed)?;
    let net = net_for(&args.inference, &params, seed)?;
    let reports: Vec<InferenceReport> = if args.inference.map_method == MapMethod::In {
        let net = net.as_ref().expect("loaded for the in method");
        (0..data.len())
            .into_par_iter()
            .map(|m| {
                let state = net.map(data.row(m))?;
                Ok(InferenceReport {
                    joint_log_prob: params.joint_log_prob(data.row(m), &state)?,
                    map_state: state,
                    iterations_used: 0,
                    flips: 0,
                    converged: true,
                    trace: None,
                })
            })
            .collect::<drbn_core::Result<_>>()?
    } else {
        let source = map_source(&args.inference, net.as_ref(), seed)?;
        (0..data.len())
            .into_par_iter()
            .map(|m| map_inference(data.row(m), &params, &row_source(&source, m)))
            .collect::<drbn_core::Result<_>>()?
    };
    let text = serde_json::to_string_pretty(&reports).map_err(|e| Failure::data(e.to_string()))?;
    write_atomic(&args.out, text.as_bytes())?;
    let mean = reports.iter().map(|r| r.joint_log_prob).sum::<f64>() / reports.len() as f64;
    println!(
        "inferred {} MAP states ({:?}): mean joint log-probability {mean:.4}; wrote {}",
        reports.len(),
        args.inference.map_method,
        args.out.display()
    );
    Ok(())
}

pub fn loglik(args: LoglikArgs, seed: u64) -> CmdResult {
    let params = model(&args.model)?;
    let data = query_data(&args.data, &params, seed)?;
    let net = net_for(&args.inference, &params, seed)?;
    let exact = args.inference.map_method == MapMethod::Exact;
    let values: Vec<f64> = if exact {
        (0..data.len())
            .into_par_iter()
            .map(|m| exact_marginal(data.row(m), &params))
            .collect::<drbn_core::Result<_>>()?
    } else {
        let source = map_source(&args.inference, net.as_ref(), seed)?;
        (0..data.len())
            .into_par_iter()
            .map(|m| Ok(map_inference(data.row(m), &params, &row_source(&source, m))?.joint_log_prob))
            .collect::<drbn_core::Result<_>>()?
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "loglik"]).map_err(csv_failure)?;
    for (m, v) in values.iter().enumerate() {
        w.write_record([m.to_string(), v.to_string()]).map_err(csv_failure)?;
    }
    write_atomic(&args.out, &w.into_inner().map_err(|e| Failure::data(e.to_string()))?)?;
    println!(
        "{} log-likelihood over {} vectors: mean {:.4}; wrote {}",
        if exact { "exact" } else { "max-approximated" },
        values.len(),
        values.iter().sum::<f64>() / values.len() as f64,
        args.out.display()
    );
    Ok(())
}
