//! Distribution-level diagnostics: a beta moment fit for sampled MMSE
//! values, the closed-form gap between the average rate and its
//! average-MMSE lower bound under that fit, and the separate-expectation
//! SINR approximation used as a comparison metric.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{empirical_mean_outer, ChannelEnsemble};
use crate::numerics::{digamma, CMat, SeededRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("domain error: {0}")]
    DomainError(String),
}

/// Shape parameters of a fitted beta distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaFit {
    pub alpha: f64,
    pub beta: f64,
}

/// Moment-matched beta fit: with sample mean `m` and (population) variance
/// `s`, `alpha = m (m(1-m)/s - 1)` and `beta = (1-m)(m(1-m)/s - 1)`.
pub fn beta_fit(samples: &[f64]) -> Result<BetaFit, AnalysisError> {
    if samples.len() < 2 {
        return Err(AnalysisError::DegenerateSample(
            "need at least two samples".into(),
        ));
    }
    for &x in samples {
        if !(x > 0.0 && x < 1.0) {
            return Err(AnalysisError::DegenerateSample(format!(
                "sample {x} outside (0, 1)"
            )));
        }
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if var < 1e-14 {
        return Err(AnalysisError::DegenerateSample(format!(
            "variance {var} too small"
        )));
    }
    let scale = mean * (1.0 - mean) / var - 1.0;
    if !(scale > 0.0) {
        return Err(AnalysisError::DegenerateSample(format!(
            "variance {var} incompatible with a beta law at mean {mean}"
        )));
    }
    Ok(BetaFit {
        alpha: mean * scale,
        beta: (1.0 - mean) * scale,
    })
}

/// Closed-form estimate of the gap between the average rate and the
/// `-log2(average MMSE)` lower bound under a beta model, using the
/// `psi(x) ~ ln(x + 1/2)` shortcut:
/// `log2(1 + (beta/2) / ((alpha - 1/2)(alpha + beta)))`.
pub fn gap_estimate(fit: &BetaFit) -> Result<f64, AnalysisError> {
    if !(fit.alpha > 0.5) {
        return Err(AnalysisError::DomainError(format!(
            "gap estimate needs alpha > 1/2, got {}",
            fit.alpha
        )));
    }
    if !(fit.beta >= 0.0) {
        return Err(AnalysisError::DomainError(format!(
            "beta must be non-negative, got {}",
            fit.beta
        )));
    }
    let ratio = 0.5 * fit.beta / ((fit.alpha - 0.5) * (fit.alpha + fit.beta));
    Ok((1.0 + ratio).log2())
}

/// Same gap evaluated with the exact digamma expression for the beta
/// geometric mean: `(psi(a+b) - psi(a))/ln 2 - log2((a+b)/a)`.
pub fn gap_estimate_exact(fit: &BetaFit) -> Result<f64, AnalysisError> {
    if !(fit.alpha > 0.0) || !(fit.beta > 0.0) {
        return Err(AnalysisError::DomainError(format!(
            "exact gap needs positive shapes, got ({}, {})",
            fit.alpha, fit.beta
        )));
    }
    let psi_ab = digamma(fit.alpha + fit.beta)
        .map_err(|e| AnalysisError::DomainError(e.to_string()))?;
    let psi_a = digamma(fit.alpha).map_err(|e| AnalysisError::DomainError(e.to_string()))?;
    let avg_rate = (psi_ab - psi_a) / std::f64::consts::LN_2;
    let bound = ((fit.alpha + fit.beta) / fit.alpha).log2();
    Ok(avg_rate - bound)
}

/// Scalar-channel MMSE draws `noise / (|h p|^2 + noise)` with `h` complex
/// Gaussian with unit variance per real component; feeds the beta fit.
pub fn sample_siso_mmse(
    precoder_power: f64,
    noise_var: f64,
    count: usize,
    rng: &mut SeededRng,
) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let h = Complex64::new(rng.next_normal(), rng.next_normal());
            noise_var / (h.norm_sqr() * precoder_power + noise_var)
        })
        .collect()
}

/// Average-rate approximation that applies the expectation separately to the
/// SINR numerator and denominator:
/// `log2(1 + p_k^H R_k p_k / (noise + sum_{i != k} p_i^H R_k p_i))` with
/// `R_k` the empirical channel second moment. Not a bound in either
/// direction.
pub fn sinr_approx_rate(precoders: &[Vec<Complex64>], ensemble: &ChannelEnsemble, k: usize) -> f64 {
    let outer = empirical_mean_outer(ensemble, k);
    sinr_approx_rate_with(precoders, &outer, ensemble.noise_var(k), k)
}

/// As [`sinr_approx_rate`] with a precomputed second moment.
pub fn sinr_approx_rate_with(
    precoders: &[Vec<Complex64>],
    mean_outer: &CMat,
    noise_var: f64,
    k: usize,
) -> f64 {
    let signal = mean_outer.quad(&precoders[k], &precoders[k]).re;
    let mut denom = noise_var;
    for (i, p) in precoders.iter().enumerate() {
        if i != k {
            denom += mean_outer.quad(p, p).re;
        }
    }
    (1.0 + signal / denom).log2()
}
