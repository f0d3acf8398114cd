//! Scalar helpers shared by every probability evaluation.
//!
//! Logits are clamped to `[-LOGIT_CLAMP, LOGIT_CLAMP]` before any exponential
//! is taken. Both Bernoulli outcomes see the same clamped logit, so clamped
//! conditionals still normalize.

pub const LOGIT_CLAMP: f64 = 30.0;

/// Lower bound applied to every Gaussian conditional variance.
pub const VARIANCE_FLOOR: f64 = 1e-4;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn clamp_logit(a: f64) -> f64 {
    a.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
}

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    let a = clamp_logit(a);
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(a))` without overflow.
#[inline]
pub fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

#[inline]
pub fn log_sigmoid(a: f64) -> f64 {
    -softplus(-clamp_logit(a))
}

/// `log P(v | logit a)` for a Bernoulli unit, `v` in `{0, 1}`.
///
/// Written as `v a - softplus(a)` so fractional targets act as cross-entropy.
#[inline]
pub fn log_bernoulli(v: f64, a: f64) -> f64 {
    let a = clamp_logit(a);
    v * a - softplus(a)
}

#[inline]
pub fn log_gaussian(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    -0.5 * (LN_2PI + variance.ln()) - r * r / (2.0 * variance)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// In-place log-softmax.
pub fn log_softmax(logits: &mut [f64]) {
    let lse = log_sum_exp(logits);
    for z in logits.iter_mut() {
        *z -= lse;
    }
}
