use super::cache::FlipCache;
use crate::error::Result;
use crate::model::{LatentState, ModelParams};

/// `P(h_k = 1 | h_ref_{-k}, x)` for every latent unit, flattened bottom-up.
///
/// Each entry depends only on `h_ref`, so the locals are independent of one
/// another; they are evaluated here against one shared cache.
pub fn pseudo_likelihood_posterior(
    x: &[f64],
    params: &ModelParams,
    h_ref: &LatentState,
) -> Result<Vec<f64>> {
    let mut cache = FlipCache::new(params, x, h_ref)?;
    let mut out = Vec::with_capacity(params.total_latent());
    for (l, &n) in params.latent_sizes().iter().enumerate() {
        for j in 0..n {
            out.push(cache.flip_ratio(h_ref, l, j)?);
        }
    }
    Ok(out)
}

/// `log prod_k P(h_k | h_{-k}, x)` evaluated at `h`.
pub fn pseudo_log_likelihood(x: &[f64], params: &ModelParams, h: &LatentState) -> Result<f64> {
    let locals = pseudo_likelihood_posterior(x, params, h)?;
    Ok(h.layers
        .iter()
        .flatten()
        .zip(locals)
        .map(|(&bit, p)| if bit == 1 { p.ln() } else { (1.0 - p).ln() })
        .sum())
}
