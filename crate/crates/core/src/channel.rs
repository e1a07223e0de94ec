//! Imperfect-CSIT channel model and the Monte Carlo ensemble that stands in
//! for every conditional expectation downstream.

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{sample_complex_gaussian, CMat, SeededRng};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Per-user conditional channel distribution: mean vector, Gaussian error
/// covariance, and receiver noise variance.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    means: Vec<Vec<Complex64>>,
    error_covs: Vec<CMat>,
    noise_vars: Vec<f64>,
    num_antennas: usize,
}

impl ChannelModel {
    pub fn new(
        means: Vec<Vec<Complex64>>,
        error_covs: Vec<CMat>,
        noise_vars: Vec<f64>,
    ) -> Result<Self, ChannelError> {
        let k = means.len();
        if k == 0 {
            return Err(ChannelError::InvalidParameter("need at least one user".into()));
        }
        if error_covs.len() != k || noise_vars.len() != k {
            return Err(ChannelError::DimensionMismatch(format!(
                "{} means, {} covariances, {} noise variances",
                k,
                error_covs.len(),
                noise_vars.len()
            )));
        }
        let n = means[0].len();
        if n == 0 {
            return Err(ChannelError::InvalidParameter(
                "need at least one antenna".into(),
            ));
        }
        for (k_idx, m) in means.iter().enumerate() {
            if m.len() != n {
                return Err(ChannelError::DimensionMismatch(format!(
                    "mean of user {k_idx} has {} entries, expected {n}",
                    m.len()
                )));
            }
        }
        for (k_idx, c) in error_covs.iter().enumerate() {
            if c.rows() != n || c.cols() != n {
                return Err(ChannelError::DimensionMismatch(format!(
                    "covariance of user {k_idx} is {}x{}, expected {n}x{n}",
                    c.rows(),
                    c.cols()
                )));
            }
        }
        for (k_idx, &v) in noise_vars.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ChannelError::InvalidParameter(format!(
                    "noise variance of user {k_idx} must be positive, got {v}"
                )));
            }
        }
        Ok(ChannelModel {
            means,
            error_covs,
            noise_vars,
            num_antennas: n,
        })
    }

    pub fn num_users(&self) -> usize {
        self.means.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn mean(&self, k: usize) -> &[Complex64] {
        &self.means[k]
    }

    pub fn error_cov(&self, k: usize) -> &CMat {
        &self.error_covs[k]
    }

    pub fn noise_var(&self, k: usize) -> f64 {
        self.noise_vars[k]
    }
}

/// `M` realizations per user drawn from the conditional distribution, plus
/// the noise-normalized duals used on the multiple-access side.
#[derive(Debug, Clone)]
pub struct ChannelEnsemble {
    model: ChannelModel,
    num_samples: usize,
    // per user, M*N entries with sample m at [m*N .. (m+1)*N]
    samples: Vec<Vec<Complex64>>,
    dual_samples: Vec<Vec<Complex64>>,
}

/// Draws the sample ensemble. Each `(user, sample)` pair gets its own RNG
/// substream, so the result is independent of scheduling and identical with
/// or without the `parallel` feature.
pub fn build_ensemble(
    model: ChannelModel,
    num_samples: usize,
    rng: &SeededRng,
) -> Result<ChannelEnsemble, ChannelError> {
    if num_samples == 0 {
        return Err(ChannelError::InvalidParameter(
            "need at least one realization".into(),
        ));
    }
    let n = model.num_antennas();
    let mut samples = Vec::with_capacity(model.num_users());
    let mut dual_samples = Vec::with_capacity(model.num_users());
    for k in 0..model.num_users() {
        let mean = model.mean(k).to_vec();
        let cov = model.error_cov(k).clone();
        let rows = par::map_range(num_samples, |m| {
            let tag = ((k as u64) << 32) | m as u64;
            let mut sub = rng.substream(tag);
            sample_complex_gaussian(&mean, &cov, &mut sub)
                .expect("model dimensions validated at construction")
        });
        let mut flat = Vec::with_capacity(num_samples * n);
        for row in rows {
            flat.extend(row);
        }
        let inv_sigma = 1.0 / model.noise_var(k).sqrt();
        let dual: Vec<Complex64> = flat.iter().map(|h| h * inv_sigma).collect();
        samples.push(flat);
        dual_samples.push(dual);
    }
    Ok(ChannelEnsemble {
        model,
        num_samples,
        samples,
        dual_samples,
    })
}

impl ChannelEnsemble {
    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn num_users(&self) -> usize {
        self.model.num_users()
    }

    pub fn num_antennas(&self) -> usize {
        self.model.num_antennas()
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// Channel realization `h_k^(m)`.
    #[inline]
    pub fn sample(&self, k: usize, m: usize) -> &[Complex64] {
        let n = self.model.num_antennas();
        &self.samples[k][m * n..(m + 1) * n]
    }

    /// Noise-normalized dual realization, `sample / sqrt(noise_var)`.
    #[inline]
    pub fn dual_sample(&self, k: usize, m: usize) -> &[Complex64] {
        let n = self.model.num_antennas();
        &self.dual_samples[k][m * n..(m + 1) * n]
    }

    pub fn noise_var(&self, k: usize) -> f64 {
        self.model.noise_var(k)
    }
}

/// Monte Carlo estimate of the per-user channel second moment, the Hermitian
/// PSD matrix `(1/M) sum_m h_k^(m) h_k^(m)^H`.
pub fn empirical_mean_outer(ensemble: &ChannelEnsemble, k: usize) -> CMat {
    let n = ensemble.num_antennas();
    let m_count = ensemble.num_samples();
    let mut acc = par::sum_cmat(m_count, n, n, |acc, m| {
        acc.add_outer_scaled(ensemble.sample(k, m), 1.0);
    });
    acc.scale(1.0 / m_count as f64);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn deterministic_model(k: usize, n: usize) -> ChannelModel {
        let means = (0..k)
            .map(|i| {
                (0..n)
                    .map(|j| Complex64::new((i + 1) as f64, j as f64))
                    .collect()
            })
            .collect();
        let covs = vec![CMat::zeros(n, n); k];
        ChannelModel::new(means, covs, vec![1.0; k]).unwrap()
    }

    #[test]
    fn zero_covariance_gives_degenerate_ensemble() {
        let model = deterministic_model(3, 2);
        let rng = SeededRng::new(0, 0);
        let ens = build_ensemble(model, 5, &rng).unwrap();
        for k in 0..3 {
            for m in 0..5 {
                assert_eq!(ens.sample(k, m), ens.model().mean(k));
            }
        }
    }

    #[test]
    fn dual_samples_are_noise_normalized() {
        let means = vec![vec![Complex64::new(1.0, 2.0); 3]; 2];
        let covs = vec![CMat::identity(3); 2];
        // powers of two keep the division/multiplication round trip exact
        let model = ChannelModel::new(means, covs, vec![4.0, 0.25]).unwrap();
        let rng = SeededRng::new(1, 0);
        let ens = build_ensemble(model, 16, &rng).unwrap();
        for k in 0..2 {
            let sigma = ens.noise_var(k).sqrt();
            for m in 0..16 {
                for (d, s) in ens.dual_sample(k, m).iter().zip(ens.sample(k, m)) {
                    assert_eq!(d * sigma, *s);
                }
            }
        }
    }

    #[test]
    fn scenario_shape_builds() {
        let mut rng = SeededRng::new(7, 0);
        let means = (0..4)
            .map(|_| (0..4).map(|_| rng.next_complex_normal()).collect())
            .collect();
        let model = ChannelModel::new(means, vec![CMat::identity(4); 4], vec![1.0; 4]).unwrap();
        let ens = build_ensemble(model, 1000, &rng).unwrap();
        assert_eq!(ens.num_users(), 4);
        assert_eq!(ens.num_antennas(), 4);
        assert_eq!(ens.num_samples(), 1000);
    }

    #[test]
    fn second_moment_of_scalar_channel() {
        // E|h|^2 = |mean|^2 + cov = 2 for mean 1, cov 1
        let model = ChannelModel::new(
            vec![vec![Complex64::new(1.0, 0.0)]],
            vec![CMat::identity(1)],
            vec![1.0],
        )
        .unwrap();
        let rng = SeededRng::new(13, 0);
        let m_count = 100_000;
        let ens = build_ensemble(model, m_count, &rng).unwrap();
        let mean_sq = crate::par::sum_f64(m_count, |m| ens.sample(0, m)[0].norm_sqr())
            / m_count as f64;
        assert!((mean_sq - 2.0).abs() / 2.0 < 0.02, "got {mean_sq}");
    }

    #[test]
    fn ensemble_is_deterministic() {
        let means = vec![vec![Complex64::new(0.0, 0.0); 2]; 2];
        let model = ChannelModel::new(means, vec![CMat::identity(2); 2], vec![1.0; 2]).unwrap();
        let rng = SeededRng::new(5, 9);
        let a = build_ensemble(model.clone(), 32, &rng).unwrap();
        let b = build_ensemble(model, 32, &rng).unwrap();
        for k in 0..2 {
            for m in 0..32 {
                assert_eq!(a.sample(k, m), b.sample(k, m));
            }
        }
    }

    #[test]
    fn mean_outer_trivial_cases() {
        // deterministic h = e1 -> outer = e1 e1^H
        let mut means = vec![vec![Complex64::new(0.0, 0.0); 3]];
        means[0][0] = Complex64::new(1.0, 0.0);
        let model = ChannelModel::new(means, vec![CMat::zeros(3, 3)], vec![1.0]).unwrap();
        let ens = build_ensemble(model, 4, &SeededRng::new(0, 0)).unwrap();
        let outer = empirical_mean_outer(&ens, 0);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(outer.at(i, j).re, expect, epsilon = 1e-15);
                assert_abs_diff_eq!(outer.at(i, j).im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn mean_outer_single_sample_exact() {
        let means = vec![vec![Complex64::new(0.5, -0.5); 2]];
        let model = ChannelModel::new(means, vec![CMat::identity(2)], vec![1.0]).unwrap();
        let ens = build_ensemble(model, 1, &SeededRng::new(3, 0)).unwrap();
        let outer = empirical_mean_outer(&ens, 0);
        let h = ens.sample(0, 0);
        for i in 0..2 {
            for j in 0..2 {
                let expect = h[i] * h[j].conj();
                assert_abs_diff_eq!((outer.at(i, j) - expect).norm(), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn mean_outer_lln() {
        let means = vec![vec![Complex64::new(0.0, 0.0); 4]];
        let model = ChannelModel::new(means, vec![CMat::identity(4)], vec![1.0]).unwrap();
        let ens = build_ensemble(model, 100_000, &SeededRng::new(21, 0)).unwrap();
        let outer = empirical_mean_outer(&ens, 0);
        let mut diff = outer;
        diff.add_scaled_mat(&CMat::identity(4), -1.0);
        let rel = diff.frobenius_norm() / 2.0; // ||I_4||_F = 2
        assert!(rel < 0.05, "off by {rel}");
    }

    #[test]
    fn model_validation() {
        assert!(ChannelModel::new(vec![], vec![], vec![]).is_err());
        let bad = ChannelModel::new(
            vec![vec![Complex64::new(0.0, 0.0); 2]],
            vec![CMat::identity(3)],
            vec![1.0],
        );
        assert!(matches!(bad, Err(ChannelError::DimensionMismatch(_))));
        let bad_noise = ChannelModel::new(
            vec![vec![Complex64::new(0.0, 0.0); 2]],
            vec![CMat::identity(2)],
            vec![0.0],
        );
        assert!(bad_noise.is_err());
    }
}
