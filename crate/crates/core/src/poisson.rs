//! Inhomogeneous Poisson process machinery for an exponential rate
//! `λ(x) = d·e^{kx}`: rate, cumulative intensity, pmf, and the credible
//! upper bound on the number of events.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::types::{ceil_count, MethodParams};

/// Below this magnitude `k` is treated as zero and `Λ(0,n) = d·n`.
pub const K_EPSILON: f64 = 1e-9;

/// Largest exponent `k·x` accepted before reporting overflow.
pub const MAX_EXPONENT: f64 = 700.0;

/// Fitted exponential rate function `λ(x) = d·e^{kx}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    d: f64,
    k: f64,
}

impl RateModel {
    pub fn new(d: f64, k: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite() && k.is_finite()) {
            return Err(Error::Domain(format!(
                "rate model requires finite d > 0 and finite k (d = {d}, k = {k})"
            )));
        }
        Ok(Self { d, k })
    }

    /// Amplitude: the rate at `x = 0`.
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Per-rank exponent.
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn lambda_at(&self, x: f64) -> Result<f64> {
        lambda_at(self, x)
    }

    pub fn integral(&self, n: f64) -> Result<f64> {
        lambda_integral(self, n)
    }
}

fn checked_exp(k: f64, x: f64) -> Result<f64> {
    let exponent = k * x;
    if !exponent.is_finite() || exponent > MAX_EXPONENT {
        return Err(Error::Overflow { x, exponent });
    }
    Ok(exponent.exp())
}

/// `λ(x) = d·e^{kx}`.
pub fn lambda_at(model: &RateModel, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("rate evaluated at non-finite x = {x}")));
    }
    Ok(model.d * checked_exp(model.k, x)?)
}

/// `Λ(0, n) = (d/k)(e^{kn} − 1)`, or `d·n` when `|k| < K_EPSILON`.
pub fn lambda_integral(model: &RateModel, n: f64) -> Result<f64> {
    lambda_between(model, 0.0, n)
}

/// `Λ(a, b) = (d/k)(e^{kb} − e^{ka})`, the expected event count on `(a, b]`.
pub fn lambda_between(model: &RateModel, a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < a {
        return Err(Error::Domain(format!(
            "integration interval ({a}, {b}] must satisfy 0 <= a <= b"
        )));
    }
    if b == a {
        return Ok(0.0);
    }
    let RateModel { d, k } = *model;
    if k.abs() < K_EPSILON {
        return Ok(d * (b - a));
    }
    // e^{kb} − e^{ka} = e^{ka}·expm1(k(b−a)), which keeps precision for small k.
    let base = checked_exp(k, a)?;
    checked_exp(k, b)?;
    Ok((d / k) * base * (k * (b - a)).exp_m1())
}

/// `P(N = r)` for a Poisson variable with the given mean, evaluated in log space.
pub fn poisson_pmf(mean: f64, r: u64) -> Result<f64> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::Domain(format!(
            "Poisson mean must be finite and >= 0, got {mean}"
        )));
    }
    Ok(pmf_unchecked(mean, r))
}

fn pmf_unchecked(mean: f64, r: u64) -> f64 {
    if mean == 0.0 {
        return if r == 0 { 1.0 } else { 0.0 };
    }
    let r_f = r as f64;
    (r_f * mean.ln() - mean - ln_gamma(r_f + 1.0)).exp()
}

/// Smallest `R` whose Poisson CDF at `mean` reaches `confidence`.
pub fn upper_credible_count(mean: f64, confidence: f64) -> Result<u64> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::Domain(format!(
            "Poisson mean must be finite and >= 0, got {mean}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    // The CDF reaches any confidence below 1 - 1e-12 well inside this many
    // standard deviations; the cap only guards against a stalled float sum.
    let cap = (mean + 40.0 * (mean + 1.0).sqrt() + 40.0).ceil() as u64;
    let mut cdf = 0.0;
    for r in 0..=cap {
        cdf += pmf_unchecked(mean, r);
        if cdf >= confidence {
            return Ok(r);
        }
    }
    Ok(cap)
}

/// Relevant documents to find before stopping: `⌈R·T⌉` where `R` is the
/// credible upper bound on the total over ranks `(0, n]`.
pub fn required_relevant(model: &RateModel, n: usize, params: &MethodParams) -> Result<usize> {
    if n == 0 {
        return Err(Error::Domain("topic size must be at least 1".into()));
    }
    let mean = lambda_integral(model, n as f64)?;
    required_for_mean(mean, params)
}

/// `⌈R·T⌉` given the expected total directly.
pub fn required_for_mean(mean: f64, params: &MethodParams) -> Result<usize> {
    let upper = upper_credible_count(mean, params.confidence)?;
    Ok(ceil_count(upper as f64 * params.target_recall))
}
