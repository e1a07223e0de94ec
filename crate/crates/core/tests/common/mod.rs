//! Shared scenario builders for the integration tests.

use misoqos_core::channel::{build_ensemble, ChannelEnsemble, ChannelModel};
use misoqos_core::numerics::{CMat, SeededRng};
use num_complex::Complex64;

/// Random-mean scenario with identity error covariance and unit noise.
pub fn gaussian_scenario(
    k_users: usize,
    n_antennas: usize,
    m_samples: usize,
    mean_seed: u64,
    sample_seed: u64,
) -> ChannelEnsemble {
    let mut rng = SeededRng::new(mean_seed, 0);
    let means = (0..k_users)
        .map(|_| (0..n_antennas).map(|_| rng.next_complex_normal()).collect())
        .collect();
    let model = ChannelModel::new(
        means,
        vec![CMat::identity(n_antennas); k_users],
        vec![1.0; k_users],
    )
    .unwrap();
    build_ensemble(model, m_samples, &SeededRng::new(sample_seed, 0)).unwrap()
}

/// The reference four-user scenario shape: K = N = 4, C = I, unit noise,
/// M = 1000 realizations.
pub fn reference_scenario(seed: u64) -> ChannelEnsemble {
    gaussian_scenario(4, 4, 1000, seed, seed.wrapping_add(0x9E37))
}

pub const REFERENCE_RATES: [f64; 4] = [0.5146, 0.737, 1.0, 0.2345];
pub const REFERENCE_MMSE: [f64; 4] = [0.7, 0.6, 0.5, 0.85];

/// Random BC precoders for test instances.
pub fn random_precoders(k_users: usize, n_antennas: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = SeededRng::new(seed, 3);
    (0..k_users)
        .map(|_| (0..n_antennas).map(|_| rng.next_complex_normal()).collect())
        .collect()
}
