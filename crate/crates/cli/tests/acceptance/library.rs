//! Criteria checked directly against the library.

use drbn_core::inference::{
    aug_ca_map, exact_bound, exact_marginal, map_inference, marginal_log_likelihood_max,
    train_inference_net, CaConfig, FlipCache, InferenceNet, MapSource,
    NetTrainConfig,
};
use drbn_core::learning::{
    accumulate_joint_grad, exact_bound_grad, exact_log_likelihood_grad, finite_difference,
    max_abs_diff, ModelGrad,
};
use drbn_core::rng::{seeded, stream_id};
use drbn_core::{LabelHead, LatentState, ModelParams, VisibleKind};
use rand::Rng;

use crate::Outcome;

pub fn map_oracle_agreement() -> Outcome {
    // Starts: the network's guess plus two seeded random states.
    let cfg = CaConfig { restarts: 3, ..CaConfig::default() };
    let single = CaConfig { restarts: 1, ..CaConfig::default() };
    let (mut exact_hits, mut close, mut total) = (0, 0, 0);
    let mut single_close = 0;
    for model in 0..100u64 {
        let mut rng = seeded(model, stream_id(&[0xacc3]));
        let params = ModelParams::random(VisibleKind::Binary, &[6, 10], 1.0, &mut rng).unwrap();
        let (train, _) = params.ancestral_sample(stream_id(&[model, 1]), 2000).unwrap();
        let net_cfg = NetTrainConfig {
            seed: model,
            ..NetTrainConfig::default()
        };
        let (net, _) = train_inference_net(&params, &train, &net_cfg).unwrap();
        let (inputs, _) = params.ancestral_sample(stream_id(&[model, 2]), 10).unwrap();
        for m in 0..inputs.len() {
            let x = inputs.row(m);
            let best = map_inference(x, &params, &MapSource::Exact).unwrap();
            let found = aug_ca_map(x, &params, &net, &cfg.with_seed(stream_id(&[model, m as u64]))).unwrap();
            let gap = best.joint_log_prob - found.joint_log_prob;
            exact_hits += usize::from(found.map_state == best.map_state || gap.abs() < 1e-12);
            close += usize::from(gap <= 0.1);
            let one = aug_ca_map(x, &params, &net, &single).unwrap();
            single_close += usize::from(best.joint_log_prob - one.joint_log_prob <= 0.1);
            total += 1;
        }
    }
    let (hit_rate, close_rate) = (exact_hits as f64 / total as f64, close as f64 / total as f64);
    Outcome {
        pass: hit_rate >= 0.90 && close_rate >= 0.99,
        detail: format!(
            "{total} cases, 3 starts (network + 2 random): exact argmax {:.1}% (need 90%), within 0.1 nat {:.1}% (need 99%); network start alone: within 0.1 nat {:.1}%",
            100.0 * hit_rate,
            100.0 * close_rate,
            100.0 * single_close as f64 / total as f64
        ),
    }
}

fn random_sizes<R: Rng>(rng: &mut R) -> Vec<usize> {
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=40)];
    sizes.extend((0..depth).map(|_| rng.random_range(1..=12)));
    sizes
}

pub fn ratio_update_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ops_ok = true;
    let mut checked = 0;
    for kind in [VisibleKind::Binary, VisibleKind::Gaussian] {
        let mut rng = seeded(4, stream_id(&[kind as u64]));
        for _ in 0..1000 {
            let sizes = random_sizes(&mut rng);
            let params = ModelParams::random(kind, &sizes, 2.0, &mut rng).unwrap();
            let (batch, _) = params.ancestral_sample(rng.random(), 1).unwrap();
            let x = batch.row(0);
            let state = LatentState::random(params.latent_sizes(), &mut rng);
            let layer = rng.random_range(0..params.depth());
            let j = rng.random_range(0..sizes[layer + 1]);

            let mut cache = FlipCache::new(&params, x, &state).unwrap();
            let before = cache.ops();
            let ratio = cache.flip_ratio(&state, layer, j).unwrap();
            // One pass over the layer below the flipped unit.
            ops_ok &= cache.ops() - before == sizes[layer] as u64;

            let mut on = state.clone();
            let mut off = state.clone();
            on.layers[layer][j] = 1;
            off.layers[layer][j] = 0;
            let log_odds = params.joint_log_prob(x, &on).unwrap() - params.joint_log_prob(x, &off).unwrap();
            let naive = 1.0 / (1.0 + (-log_odds).exp());
            let rel = (ratio - naive).abs() / naive.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-9 && ops_ok,
        detail: format!(
            "{checked} triples: worst relative error {worst:.2e} (need 1e-9); operation count equals n_lower on every update: {ops_ok}"
        ),
    }
}

fn random_model<R: Rng>(kind: VisibleKind, sizes: &[usize], rng: &mut R) -> (ModelParams, Vec<f64>, Vec<LatentState>) {
    let p = ModelParams::random(kind, sizes, 1.0, rng).unwrap();
    let (batch, states) = p.ancestral_sample(rng.random(), 2).unwrap();
    (p, batch.row(0).to_vec(), states)
}

pub fn gradient_validation() -> Outcome {
    const H: f64 = 1e-5;
    let mut rng = seeded(5, stream_id(&[0xfd]));
    let mut worst = [0.0f64; 5];
    for _ in 0..5 {
        // Binary M-step: the complete-data joint of a binary RBN at fixed
        // assignments.
        let (p, x, s) = random_model(VisibleKind::Binary, &[4, 4], &mut rng);
        let mut g = ModelGrad::zeros_like(&p);
        accumulate_joint_grad(&p, &x, &s[0], None, 1.0, &mut g);
        let fd = finite_difference(&p, H, |q| q.joint_log_prob(&x, &s[0]).unwrap());
        worst[0] = worst[0].max(max_abs_diff(&g.flatten(), &fd));

        // Global fine-tuning: the joint of a deep model, both visible kinds.
        for kind in [VisibleKind::Binary, VisibleKind::Gaussian] {
            let (p, x, s) = random_model(kind, &[4, 4, 3], &mut rng);
            let mut g = ModelGrad::zeros_like(&p);
            accumulate_joint_grad(&p, &x, &s[0], None, 1.0, &mut g);
            let fd = finite_difference(&p, H, |q| q.joint_log_prob(&x, &s[0]).unwrap());
            worst[1] = worst[1].max(max_abs_diff(&g.flatten(), &fd));
        }

        // Supervised fine-tuning.
        let (mut p, x, s) = random_model(VisibleKind::Binary, &[4, 4, 3], &mut rng);
        let mut head = LabelHead::zeros(3, 3);
        head.weights.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        head.biases.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        p.label_head = Some(head);
        let y = rng.random_range(0..3);
        let mut g = ModelGrad::zeros_like(&p);
        accumulate_joint_grad(&p, &x, &s[0], Some(y), 1.0, &mut g);
        accumulate_joint_grad(&p, &x, &s[1], None, -1.0, &mut g);
        let fd = finite_difference(&p, H, |q| {
            q.label_log_posterior(y, s[0].top()).unwrap() + q.joint_log_prob(&x, &s[0]).unwrap()
                - q.joint_log_prob(&x, &s[1]).unwrap()
        });
        worst[2] = worst[2].max(max_abs_diff(&g.flatten(), &fd));

        // Variational baseline: model and network sides of the bound.
        let (p, x, _) = random_model(VisibleKind::Binary, &[4, 4], &mut rng);
        let net = InferenceNet::random(&p, 1.0, &mut rng);
        let (g_model, g_net) = exact_bound_grad(&p, &net, &x).unwrap();
        let fd = finite_difference(&p, H, |q| exact_bound(q, &net, &x).unwrap());
        worst[3] = worst[3].max(max_abs_diff(&g_model.flatten(), &fd));
        worst[3] = worst[3].max(net_gradient_gap(&p, &net, &g_net, &x, H));

        // Exact-tiny: the marginal likelihood.
        for kind in [VisibleKind::Binary, VisibleKind::Gaussian] {
            let (p, x, _) = random_model(kind, &[4, 4], &mut rng);
            let g = exact_log_likelihood_grad(&p, &x).unwrap();
            let fd = finite_difference(&p, H, |q| exact_marginal(&x, q).unwrap());
            worst[4] = worst[4].max(max_abs_diff(&g.flatten(), &fd));
        }
    }
    let names = ["binary M-step", "global fine-tune", "supervised", "variational", "exact-tiny"];
    Outcome {
        pass: worst.iter().all(|&w| w < 1e-5),
        detail: names
            .iter()
            .zip(worst)
            .map(|(n, w)| format!("{n} {w:.1e}"))
            .collect::<Vec<_>>()
            .join(", ")
            + " (max-abs, need 1e-5)",
    }
}

fn net_gradient_gap(p: &ModelParams, net: &InferenceNet, g: &InferenceNet, x: &[f64], h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for l in 0..net.layers.len() {
        let (rows, cols) = net.layers[l].weights.dim();
        for r in 0..rows {
            for c in 0..=cols {
                let bump = |delta: f64| {
                    let mut n = net.clone();
                    if c == cols {
                        n.layers[l].biases[r] += delta;
                    } else {
                        n.layers[l].weights[[r, c]] += delta;
                    }
                    exact_bound(p, &n, x).unwrap()
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let analytic = if c == cols {
                    g.layers[l].biases[r]
                } else {
                    g.layers[l].weights[[r, c]]
                };
                worst = worst.max((fd - analytic).abs());
            }
        }
    }
    worst
}

pub fn normalization_and_bounds() -> Outcome {
    let mut rng = seeded(6, stream_id(&[0x1105]));
    let mut worst_norm: f64 = 0.0;
    let (mut max_violations, mut net_violations, mut points) = (0, 0, 0);
    for model in 0..50u64 {
        let n_v = rng.random_range(1..=8);
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![n_v];
        let mut budget = 14 - n_v;
        for k in 0..depth {
            let left = depth - k - 1;
            if budget <= left {
                break;
            }
            let n = rng.random_range(1..=(budget - left).min(4));
            sizes.push(n);
            budget -= n;
        }
        let params = ModelParams::random(VisibleKind::Binary, &sizes, 2.0, &mut rng).unwrap();
        let net = InferenceNet::random(&params, 1.0, &mut rng);
        let mut total = 0.0;
        for bits in 0..1usize << n_v {
            let x: Vec<f64> = (0..n_v).map(|i| ((bits >> i) & 1) as f64).collect();
            let exact = exact_marginal(&x, &params).unwrap();
            total += exact.exp();
            let cfg = CaConfig::default().with_seed(stream_id(&[model, bits as u64]));
            let max = marginal_log_likelihood_max(&x, &params, &MapSource::Ca(cfg)).unwrap();
            let bound = exact_bound(&params, &net, &x).unwrap();
            max_violations += usize::from(max > exact + 1e-12);
            net_violations += usize::from(bound > exact + 1e-12);
            points += 1;
        }
        worst_norm = worst_norm.max((total - 1.0).abs());
    }
    Outcome {
        pass: worst_norm <= 1e-8 && max_violations == 0 && net_violations == 0,
        detail: format!(
            "50 models, {points} inputs: worst |sum - 1| {worst_norm:.1e} (need 1e-8); max-approximation above exact {max_violations} times; network bound above exact {net_violations} times"
        ),
    }
}

pub fn sampling_correctness() -> Outcome {
    const N: usize = 100_000;
    let mut rng = seeded(8, stream_id(&[0x5a]));
    let params = ModelParams::random(VisibleKind::Binary, &[3, 2, 1], 1.5, &mut rng).unwrap();
    let (batch, states) = params.ancestral_sample(8, N).unwrap();
    let mut counts = [0usize; 64];
    for (m, s) in states.iter().enumerate() {
        let xb = batch.row(m).iter().enumerate().map(|(i, &v)| (v as usize) << i).sum::<usize>();
        counts[xb | (s.to_index() as usize) << 3] += 1;
    }
    let mut worst_z: f64 = 0.0;
    let mut outside = 0;
    let mut mass = 0.0;
    for (config, &count) in counts.iter().enumerate() {
        let x: Vec<f64> = (0..3).map(|i| ((config >> i) & 1) as f64).collect();
        let state = LatentState::from_index(params.latent_sizes(), (config >> 3) as u64);
        let prob = params.joint_log_prob(&x, &state).unwrap().exp();
        mass += prob;
        let se = (prob * (1.0 - prob) / N as f64).sqrt();
        let z = (count as f64 / N as f64 - prob).abs() / se;
        worst_z = worst_z.max(z);
        outside += usize::from(z > 3.0);
    }
    Outcome {
        pass: outside == 0 && (mass - 1.0).abs() < 1e-12,
        detail: format!("64 configurations, {N} samples: largest deviation {worst_z:.2} standard errors, {outside} beyond 3"),
    }
}
