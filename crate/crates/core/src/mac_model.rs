//! Dual multiple-access-channel statistics, average MSE/MMSE expressions,
//! MMSE receivers, and the standard interference functions that drive the
//! power allocation fixed point.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelEnsemble;
use crate::numerics::{hdot, hermitian_solve_vec, norm_sq, CMat};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MacError {
    #[error("user {user} has zero average power; normalization undefined")]
    ZeroPowerUser { user: usize },
    #[error("receiver direction for user {user} is orthogonal to its mean; target unreachable along it")]
    DegenerateDirection { user: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dual-MAC filters: one vector receiver per user, one scalar precoder per
/// user per realization, and the per-user average powers implied by the
/// precoder samples.
#[derive(Debug, Clone)]
pub struct MacFilterSet {
    /// `K` receive vectors of length `N`.
    pub receivers: Vec<Vec<Complex64>>,
    /// `K` rows of `M` scalar precoders.
    pub precoder_samples: Vec<Vec<Complex64>>,
    /// `K` average powers, `powers[k] = (1/M) sum_m |t_k^(m)|^2`.
    pub powers: Vec<f64>,
}

impl MacFilterSet {
    /// Builds the set and derives the powers from the precoder samples.
    pub fn from_parts(
        receivers: Vec<Vec<Complex64>>,
        precoder_samples: Vec<Vec<Complex64>>,
    ) -> Self {
        let powers = precoder_samples
            .iter()
            .map(|row| norm_sq(row) / row.len() as f64)
            .collect();
        MacFilterSet {
            receivers,
            precoder_samples,
            powers,
        }
    }

    /// Matched-filter baseline with every scalar precoder equal to one and
    /// zero receivers; used where only the normalized precoders matter.
    pub fn unit_precoders(num_users: usize, num_antennas: usize, num_samples: usize) -> Self {
        MacFilterSet::from_parts(
            vec![vec![Complex64::new(0.0, 0.0); num_antennas]; num_users],
            vec![vec![Complex64::new(1.0, 0.0); num_samples]; num_users],
        )
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Per-user power allocation in the dual MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation(pub Vec<f64>);

impl PowerAllocation {
    pub fn new(xi: Vec<f64>) -> Self {
        assert!(
            xi.iter().all(|&x| x >= 0.0 && x.is_finite()),
            "powers must be non-negative and finite"
        );
        PowerAllocation(xi)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn l1_distance(&self, other: &PowerAllocation) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Sample moments of the normalized dual channel: per user the mean direction
/// `mu_k = (1/M) sum_m tau_k^(m) theta_k^(m)` and the second moment
/// `Theta_k = (1/M) sum_m |tau_k^(m)|^2 theta_k^(m) theta_k^(m)^H`, where
/// `tau` are the power-normalized scalar precoders.
#[derive(Debug, Clone)]
pub struct MacStatistics {
    pub mus: Vec<Vec<Complex64>>,
    pub thetas: Vec<CMat>,
}

impl MacStatistics {
    pub fn num_users(&self) -> usize {
        self.mus.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.thetas[0].rows()
    }

    /// `sum_i xi_i Theta_i + I_N`
    pub fn weighted_gram(&self, xi: &PowerAllocation) -> CMat {
        let n = self.num_antennas();
        let mut a = CMat::identity(n);
        for (theta, &x) in self.thetas.iter().zip(xi.as_slice()) {
            if x != 0.0 {
                a.add_scaled_mat(theta, x);
            }
        }
        a
    }
}

/// Computes the normalized sample moments. Fails with `ZeroPowerUser` when a
/// user's average power vanishes (its normalization is undefined).
pub fn mac_statistics(
    ensemble: &ChannelEnsemble,
    filters: &MacFilterSet,
) -> Result<MacStatistics, MacError> {
    let k_users = ensemble.num_users();
    let n = ensemble.num_antennas();
    let m_count = ensemble.num_samples();
    if filters.precoder_samples.len() != k_users {
        return Err(MacError::DimensionMismatch(format!(
            "{} precoder rows for {} users",
            filters.precoder_samples.len(),
            k_users
        )));
    }
    let mut mus = Vec::with_capacity(k_users);
    let mut thetas = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let xi = filters.powers[k];
        if xi == 0.0 {
            return Err(MacError::ZeroPowerUser { user: k });
        }
        let inv_sqrt_xi = 1.0 / xi.sqrt();
        let t_row = &filters.precoder_samples[k];
        let mut mu = par::sum_cvec(m_count, n, |acc, m| {
            let tau = t_row[m] * inv_sqrt_xi;
            for (a, th) in acc.iter_mut().zip(ensemble.dual_sample(k, m)) {
                *a += tau * th;
            }
        });
        for a in mu.iter_mut() {
            *a /= m_count as f64;
        }
        let mut theta = par::sum_cmat(m_count, n, n, |acc, m| {
            let w = t_row[m].norm_sqr() * inv_sqrt_xi * inv_sqrt_xi;
            acc.add_outer_scaled(ensemble.dual_sample(k, m), w);
        });
        theta.scale(1.0 / m_count as f64);
        mus.push(mu);
        thetas.push(theta);
    }
    Ok(MacStatistics { mus, thetas })
}

/// Average MSE of user `k` in the dual MAC for receiver `g`:
/// `1 - 2 sqrt(xi_k) Re{g^H mu_k} + g^H (sum_i xi_i Theta_i + I) g`.
pub fn mac_avg_mse(
    g: &[Complex64],
    stats: &MacStatistics,
    xi: &PowerAllocation,
    k: usize,
) -> f64 {
    let gram = stats.weighted_gram(xi);
    let quad = gram.quad(g, g).re;
    1.0 - 2.0 * xi.as_slice()[k].sqrt() * hdot(g, &stats.mus[k]).re + quad
}

/// Receiver minimizing [`mac_avg_mse`]:
/// `(sum_i xi_i Theta_i + I)^{-1} sqrt(xi_k) mu_k`.
pub fn mac_mmse_receiver(
    stats: &MacStatistics,
    xi: &PowerAllocation,
    k: usize,
) -> Vec<Complex64> {
    let gram = stats.weighted_gram(xi);
    let rhs: Vec<Complex64> = stats.mus[k]
        .iter()
        .map(|m| m * xi.as_slice()[k].sqrt())
        .collect();
    // the identity term keeps the Gram matrix positive definite
    hermitian_solve_vec(&gram, &rhs).expect("regularized Gram matrix is positive definite")
}

/// Average MMSE of user `k` conditioned on the partial CSI:
/// `1 - xi_k mu_k^H (sum_i xi_i Theta_i + I)^{-1} mu_k`.
pub fn mac_avg_mmse(stats: &MacStatistics, xi: &PowerAllocation, k: usize) -> f64 {
    let gram = stats.weighted_gram(xi);
    let sol = hermitian_solve_vec(&gram, &stats.mus[k])
        .expect("regularized Gram matrix is positive definite");
    1.0 - xi.as_slice()[k] * hdot(&stats.mus[k], &sol).re
}

/// Interference function of user `k` along the receiver direction `g_tilde`:
///
/// `I_k(xi) = (1/xi_k + |g^H mu_k|^2 (y_k - xi_k |g^H mu_k|^2)^{-1})^{-1}`
///
/// with `y_k = g^H (sum_i xi_i Theta_i + I) g`. Equals `xi_k` times the
/// scale-optimized MSE along `g_tilde`, and is invariant to the scale of
/// `g_tilde` itself.
pub fn interference(
    xi: &PowerAllocation,
    g_tilde: &[Complex64],
    stats: &MacStatistics,
    k: usize,
) -> Result<f64, MacError> {
    let xi_k = xi.as_slice()[k];
    let coupling = hdot(g_tilde, &stats.mus[k]).norm_sqr();
    if coupling == 0.0 {
        return Err(MacError::DegenerateDirection { user: k });
    }
    let gram = stats.weighted_gram(xi);
    let y = gram.quad(g_tilde, g_tilde).re;
    // analytically >= ||g_tilde||^2 > 0; the floor only guards round-off
    let denom = (y - xi_k * coupling).max(1e-14);
    Ok(1.0 / (1.0 / xi_k + coupling / denom))
}

/// Stacks [`interference`] over all users with per-user receiver directions.
pub fn interference_vector(
    xi: &PowerAllocation,
    g_tildes: &[Vec<Complex64>],
    stats: &MacStatistics,
) -> Result<Vec<f64>, MacError> {
    (0..stats.num_users())
        .map(|k| interference(xi, &g_tildes[k], stats, k))
        .collect()
}
