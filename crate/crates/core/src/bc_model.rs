//! Broadcast-channel quantities: per-realization MSE, MMSE receivers,
//! instantaneous and Monte Carlo average rates, and the conditional average
//! MSE that the QoS constraints act on.

use num_complex::Complex64;

use crate::channel::ChannelEnsemble;
use crate::numerics::{hdot, norm_sq};
use crate::par;

/// Broadcast-side filters: one precoder per user and one scalar receiver per
/// user per channel realization.
#[derive(Debug, Clone)]
pub struct BcFilterSet {
    /// `K` precoding vectors of length `N`.
    pub precoders: Vec<Vec<Complex64>>,
    /// `K` rows of `M` scalar receive filters.
    pub receivers: Vec<Vec<Complex64>>,
}

impl BcFilterSet {
    pub fn total_power(&self) -> f64 {
        self.precoders.iter().map(|p| norm_sq(p)).sum()
    }
}

/// Interference-plus-noise power seen by user `k`:
/// `sum_{i != k} |h^H p_i|^2 + noise_var`.
fn interference_plus_noise(
    precoders: &[Vec<Complex64>],
    h: &[Complex64],
    noise_var: f64,
    k: usize,
) -> f64 {
    let mut acc = noise_var;
    for (i, p) in precoders.iter().enumerate() {
        if i != k {
            acc += hdot(h, p).norm_sqr();
        }
    }
    acc
}

/// Mean square error of user `k` for one channel realization and one scalar
/// receive filter: `1 - 2 Re{f* h^H p_k} + |f|^2 (sum_i |h^H p_i|^2 + noise)`.
pub fn bc_mse(
    precoders: &[Vec<Complex64>],
    f: Complex64,
    h: &[Complex64],
    noise_var: f64,
    k: usize,
) -> f64 {
    let useful = hdot(h, &precoders[k]);
    let total = interference_plus_noise(precoders, h, noise_var, k) + useful.norm_sqr();
    1.0 - 2.0 * (f.conj() * useful).re + f.norm_sqr() * total
}

/// Scalar receive filter minimizing [`bc_mse`]:
/// `(sum_i |h^H p_i|^2 + noise)^{-1} h^H p_k`.
pub fn bc_mmse_receiver(
    precoders: &[Vec<Complex64>],
    h: &[Complex64],
    noise_var: f64,
    k: usize,
) -> Complex64 {
    let useful = hdot(h, &precoders[k]);
    let total = interference_plus_noise(precoders, h, noise_var, k) + useful.norm_sqr();
    useful / total
}

/// Minimum MSE of user `k` for one realization; always in `(0, 1]`.
pub fn bc_mmse(precoders: &[Vec<Complex64>], h: &[Complex64], noise_var: f64, k: usize) -> f64 {
    let useful = hdot(h, &precoders[k]);
    let total = interference_plus_noise(precoders, h, noise_var, k) + useful.norm_sqr();
    1.0 - useful.norm_sqr() / total
}

/// Instantaneous achievable rate `log2(1 + |h^H p_k|^2 / x_k)`; equals
/// `-log2(bc_mmse)`.
pub fn instantaneous_rate(
    precoders: &[Vec<Complex64>],
    h: &[Complex64],
    noise_var: f64,
    k: usize,
) -> f64 {
    let useful = hdot(h, &precoders[k]).norm_sqr();
    let x = interference_plus_noise(precoders, h, noise_var, k);
    (1.0 + useful / x).log2()
}

/// Monte Carlo average rate of user `k` over the ensemble.
pub fn avg_rate(ensemble: &ChannelEnsemble, filters: &BcFilterSet, k: usize) -> f64 {
    let m_count = ensemble.num_samples();
    let noise = ensemble.noise_var(k);
    par::sum_f64(m_count, |m| {
        instantaneous_rate(&filters.precoders, ensemble.sample(k, m), noise, k)
    }) / m_count as f64
}

/// Conditional average MSE of user `k`: the per-realization MSE at the stored
/// receivers, averaged over the ensemble.
pub fn avg_mse_conditional(ensemble: &ChannelEnsemble, filters: &BcFilterSet, k: usize) -> f64 {
    let m_count = ensemble.num_samples();
    let noise = ensemble.noise_var(k);
    par::sum_f64(m_count, |m| {
        bc_mse(
            &filters.precoders,
            filters.receivers[k][m],
            ensemble.sample(k, m),
            noise,
            k,
        )
    }) / m_count as f64
}

/// Per-realization MMSE receivers for all users (`K x M` table).
pub fn mmse_receivers(
    ensemble: &ChannelEnsemble,
    precoders: &[Vec<Complex64>],
) -> Vec<Vec<Complex64>> {
    let m_count = ensemble.num_samples();
    (0..ensemble.num_users())
        .map(|k| {
            let noise = ensemble.noise_var(k);
            par::map_range(m_count, |m| {
                bc_mmse_receiver(precoders, ensemble.sample(k, m), noise, k)
            })
        })
        .collect()
}
