//! Alternating-optimization power minimization: per-realization BC MMSE
//! receivers, conversion to the dual MAC, an interference-function power
//! update, MAC receiver update, and conversion back, iterated until the
//! power allocation stabilizes in L1 norm.

use num_complex::Complex64;
use thiserror::Error;

use crate::analysis::sinr_approx_rate_with;
use crate::bc_model::{avg_rate, mmse_receivers, BcFilterSet};
use crate::channel::{empirical_mean_outer, ChannelEnsemble};
use crate::duality::{bc_to_mac, mac_to_bc, DualityError};
use crate::mac_model::{
    interference, mac_avg_mmse, mac_mmse_receiver, mac_statistics, MacError, MacFilterSet,
    PowerAllocation,
};
use crate::numerics::{norm_sq, to_db, CMat, SeededRng};

/// Consecutive iterations of monotone power growth with unmet targets before
/// the run is declared divergent.
const GROWTH_WINDOW: usize = 50;

/// Substream tag for drawing initial precoders.
const INIT_STREAM_TAG: u64 = u64::MAX - 0x5EED;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TargetsError {
    #[error("invalid target for user {user}: {detail}")]
    Invalid { user: usize, detail: String },
    #[error("need at least one user")]
    Empty,
}

/// Per-user QoS targets: average rates and the equivalent average-MMSE
/// ceilings `mmse = 2^(-rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QosTargets {
    rates: Vec<f64>,
    mmse_targets: Vec<f64>,
}

impl QosTargets {
    /// From per-user rates in bits per channel use. Rates must be positive
    /// and finite; a zero rate is allowed as the degenerate "no requirement"
    /// target (mmse ceiling 1).
    pub fn from_rates(rates: &[f64]) -> Result<Self, TargetsError> {
        if rates.is_empty() {
            return Err(TargetsError::Empty);
        }
        for (user, &r) in rates.iter().enumerate() {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(TargetsError::Invalid {
                    user,
                    detail: format!("rate {r} must be non-negative and finite"),
                });
            }
        }
        let mmse_targets = rates.iter().map(|r| (-r).exp2()).collect();
        Ok(QosTargets {
            rates: rates.to_vec(),
            mmse_targets,
        })
    }

    /// From per-user MMSE ceilings in `(0, 1]`.
    pub fn from_mmse(mmse: &[f64]) -> Result<Self, TargetsError> {
        if mmse.is_empty() {
            return Err(TargetsError::Empty);
        }
        for (user, &e) in mmse.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(TargetsError::Invalid {
                    user,
                    detail: format!("mmse target {e} must lie in (0, 1]"),
                });
            }
        }
        let rates = mmse.iter().map(|e| -e.log2()).collect();
        Ok(QosTargets {
            rates,
            mmse_targets: mmse.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn mmse(&self) -> &[f64] {
        &self.mmse_targets
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Convergence threshold on the L1 change of the power allocation.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Total-power guard; exceeding it declares divergence.
    pub power_cap: Option<f64>,
    /// Seed for the random initial precoders.
    pub init_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-2,
            max_iterations: 500,
            power_cap: Some(1e6),
            init_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    Diverged,
    MaxIterations,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Diverged => "diverged",
            Termination::MaxIterations => "max_iterations",
        }
    }
}

/// One row per solver iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub xi: Vec<f64>,
    pub mmse: Vec<f64>,
    pub rate_mc: Vec<f64>,
    pub rate_sinr: Vec<f64>,
    pub total_power_db: f64,
}

#[derive(Debug, Clone)]
pub struct SolveTrajectory {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl SolveTrajectory {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub bc_filters: BcFilterSet,
    pub power: PowerAllocation,
    pub trajectory: SolveTrajectory,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Duality(#[from] DualityError),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Random initial precoders: i.i.d. circular complex Gaussian entries, each
/// vector scaled to unit norm.
pub fn random_unit_precoders(
    num_users: usize,
    num_antennas: usize,
    init_seed: u64,
) -> Vec<Vec<Complex64>> {
    let base = SeededRng::new(init_seed, 0).substream(INIT_STREAM_TAG);
    (0..num_users)
        .map(|k| {
            let mut rng = base.substream(k as u64);
            let mut p: Vec<Complex64> = (0..num_antennas)
                .map(|_| rng.next_complex_normal())
                .collect();
            let norm = norm_sq(&p).sqrt();
            for x in p.iter_mut() {
                *x /= norm;
            }
            p
        })
        .collect()
}

/// Single power update `xi_k = 2^(rate_k) * I_k(xi_prev)` with the supplied
/// receiver directions. Exactly one application; errors from degenerate
/// directions propagate.
pub fn power_update(
    xi_prev: &PowerAllocation,
    g_tildes: &[Vec<Complex64>],
    stats: &crate::mac_model::MacStatistics,
    targets: &QosTargets,
) -> Result<PowerAllocation, MacError> {
    let mut xi = Vec::with_capacity(xi_prev.len());
    for k in 0..xi_prev.len() {
        let i_k = interference(xi_prev, &g_tildes[k], stats, k)?;
        xi.push(targets.rates()[k].exp2() * i_k);
    }
    Ok(PowerAllocation::new(xi))
}

/// Runs the solver from random initial precoders drawn from
/// `opts.init_seed`.
pub fn solve(
    ensemble: &ChannelEnsemble,
    targets: &QosTargets,
    opts: &SolverOptions,
) -> Result<SolveResult, SolveError> {
    let init = random_unit_precoders(ensemble.num_users(), ensemble.num_antennas(), opts.init_seed);
    solve_with_init(ensemble, targets, opts, init)
}

/// Runs the solver from explicit initial precoders (used for warm starts).
pub fn solve_with_init(
    ensemble: &ChannelEnsemble,
    targets: &QosTargets,
    opts: &SolverOptions,
    init_precoders: Vec<Vec<Complex64>>,
) -> Result<SolveResult, SolveError> {
    let k_users = ensemble.num_users();
    if targets.len() != k_users {
        return Err(SolveError::InvalidInput(format!(
            "{} targets for {} users",
            targets.len(),
            k_users
        )));
    }
    if init_precoders.len() != k_users {
        return Err(SolveError::InvalidInput(format!(
            "{} initial precoders for {} users",
            init_precoders.len(),
            k_users
        )));
    }
    if !(opts.tolerance > 0.0) {
        return Err(SolveError::InvalidInput("tolerance must be positive".into()));
    }

    let mean_outers: Vec<CMat> = (0..k_users)
        .map(|k| empirical_mean_outer(ensemble, k))
        .collect();

    let mut precoders = init_precoders;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut prev_total = f64::INFINITY;
    let mut prev_step = f64::INFINITY;
    let mut growth_streak = 0usize;

    for _iter in 0..opts.max_iterations {
        // per-realization BC MMSE receivers for the current precoders
        let receivers = mmse_receivers(ensemble, &precoders);
        let bc = BcFilterSet {
            precoders,
            receivers,
        };
        // switch to the dual MAC; the extracted powers are the reference
        // allocation for this iteration's update and convergence check
        let (mac, _) = bc_to_mac(&bc, ensemble)?;
        let xi_prev = PowerAllocation::new(mac.powers.clone());
        let stats = mac_statistics(ensemble, &mac)?;

        // receiver directions minimizing the interference at xi_prev
        let g_tildes: Vec<Vec<Complex64>> = (0..k_users)
            .map(|k| mac_mmse_receiver(&stats, &xi_prev, k))
            .collect();

        // fixed-point power update; a direction orthogonal to its user's
        // mean leaves that user's power at the pure 2^rate growth, which the
        // divergence guard then catches
        let mut xi_new = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let i_k = match interference(&xi_prev, &g_tildes[k], &stats, k) {
                Ok(v) => v,
                Err(MacError::DegenerateDirection { .. }) => xi_prev.as_slice()[k],
                Err(e) => return Err(e.into()),
            };
            xi_new.push(targets.rates()[k].exp2() * i_k);
        }
        let xi_new = PowerAllocation::new(xi_new);

        // MAC receivers consistent with the updated allocation
        let g_new: Vec<Vec<Complex64>> = (0..k_users)
            .map(|k| mac_mmse_receiver(&stats, &xi_new, k))
            .collect();
        // re-scale the normalized precoder samples to the new powers
        let t_new: Vec<Vec<Complex64>> = (0..k_users)
            .map(|k| {
                let scale = (xi_new.as_slice()[k] / xi_prev.as_slice()[k]).sqrt();
                mac.precoder_samples[k].iter().map(|t| t * scale).collect()
            })
            .collect();
        let mac_new = MacFilterSet::from_parts(g_new, t_new);
        let (bc_new, _) = mac_to_bc(&mac_new, ensemble)?;

        let mmse: Vec<f64> = (0..k_users)
            .map(|k| mac_avg_mmse(&stats, &xi_new, k))
            .collect();
        let rate_mc: Vec<f64> = (0..k_users).map(|k| avg_rate(ensemble, &bc_new, k)).collect();
        let rate_sinr: Vec<f64> = (0..k_users)
            .map(|k| {
                sinr_approx_rate_with(
                    &bc_new.precoders,
                    &mean_outers[k],
                    ensemble.noise_var(k),
                    k,
                )
            })
            .collect();
        let total = xi_new.total();
        records.push(IterationRecord {
            xi: xi_new.as_slice().to_vec(),
            mmse: mmse.clone(),
            rate_mc,
            rate_sinr,
            total_power_db: to_db(total.max(f64::MIN_POSITIVE)).expect("positive total"),
        });

        precoders = bc_new.precoders;
        let receivers = bc_new.receivers;

        if xi_new.l1_distance(&xi_prev) <= opts.tolerance {
            return Ok(SolveResult {
                bc_filters: BcFilterSet {
                    precoders,
                    receivers,
                },
                power: xi_new,
                trajectory: SolveTrajectory {
                    records,
                    termination: Termination::Converged,
                },
            });
        }

        let capped = opts.power_cap.map(|cap| total > cap).unwrap_or(false);
        let unmet = mmse
            .iter()
            .zip(targets.mmse())
            .any(|(&m, &e)| m > e + opts.tolerance);
        // divergence signature: power grows with non-contracting update steps
        // while some target stays unmet; a convergent climb (e.g. from a warm
        // start at looser targets) grows too, but its steps contract
        let step = xi_new.l1_distance(&xi_prev);
        if total > prev_total && step >= prev_step && unmet {
            growth_streak += 1;
        } else {
            growth_streak = 0;
        }
        prev_total = total;
        prev_step = step;
        if capped || (growth_streak >= GROWTH_WINDOW && unmet) {
            return Ok(SolveResult {
                bc_filters: BcFilterSet {
                    precoders,
                    receivers,
                },
                power: xi_new,
                trajectory: SolveTrajectory {
                    records,
                    termination: Termination::Diverged,
                },
            });
        }
    }

    let receivers = mmse_receivers(ensemble, &precoders);
    let final_power = records
        .last()
        .map(|r| PowerAllocation::new(r.xi.clone()))
        .unwrap_or_else(|| PowerAllocation::new(vec![0.0; k_users]));
    Ok(SolveResult {
        bc_filters: BcFilterSet {
            precoders,
            receivers,
        },
        power: final_power,
        trajectory: SolveTrajectory {
            records,
            termination: Termination::MaxIterations,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc_model::avg_mse_conditional;
    use crate::channel::{build_ensemble, ChannelModel};
    use crate::mac_model::MacStatistics;
    use crate::numerics::CMat;
    use approx::assert_abs_diff_eq;

    fn deterministic_model(channels: Vec<Vec<Complex64>>, noise: f64) -> ChannelModel {
        let n = channels[0].len();
        let k = channels.len();
        ChannelModel::new(channels, vec![CMat::zeros(n, n); k], vec![noise; k]).unwrap()
    }

    #[test]
    fn targets_round_trip() {
        let t = QosTargets::from_rates(&[1.0, 0.5146]).unwrap();
        assert_abs_diff_eq!(t.mmse()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.mmse()[1], 0.7, epsilon = 1e-4);
        let u = QosTargets::from_mmse(&[0.5, 0.7]).unwrap();
        assert_abs_diff_eq!(u.rates()[0], 1.0, epsilon = 1e-12);
        for (r, e) in u.rates().iter().zip(u.mmse()) {
            assert_abs_diff_eq!(*e, (-r).exp2(), epsilon = 1e-12);
        }
        assert!(QosTargets::from_mmse(&[0.0]).is_err());
        assert!(QosTargets::from_mmse(&[1.5]).is_err());
        assert!(QosTargets::from_rates(&[-1.0]).is_err());
    }

    #[test]
    fn scalar_fixed_point_matches_closed_form() {
        // single user, deterministic h, perfect CSI: xi* = (1/eps - 1) sigma^2 / |h|^2
        let h = Complex64::new(1.0, 0.0);
        let model = deterministic_model(vec![vec![h]], 1.0);
        let ens = build_ensemble(model, 4, &SeededRng::new(0, 0)).unwrap();
        let targets = QosTargets::from_mmse(&[0.5]).unwrap();
        let opts = SolverOptions {
            tolerance: 1e-9,
            max_iterations: 2000,
            ..Default::default()
        };
        let res = solve(&ens, &targets, &opts).unwrap();
        assert_eq!(res.trajectory.termination, Termination::Converged);
        assert_abs_diff_eq!(res.power.as_slice()[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(res.bc_filters.total_power(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(
            avg_mse_conditional(&ens, &res.bc_filters, 0),
            0.5,
            epsilon = 1e-6
        );
    }

    #[test]
    fn scalar_fixed_point_other_target() {
        // eps = 0.25, h = 2, sigma^2 = 3: xi* = 3 * 3 / 4 = 2.25
        let model = deterministic_model(vec![vec![Complex64::new(2.0, 0.0)]], 3.0);
        let ens = build_ensemble(model, 2, &SeededRng::new(0, 0)).unwrap();
        let targets = QosTargets::from_mmse(&[0.25]).unwrap();
        let opts = SolverOptions {
            tolerance: 1e-9,
            max_iterations: 2000,
            ..Default::default()
        };
        let res = solve(&ens, &targets, &opts).unwrap();
        assert_abs_diff_eq!(res.power.as_slice()[0], 2.25, epsilon = 1e-6);
    }

    #[test]
    fn orthogonal_users_decouple() {
        let mut h1 = vec![Complex64::new(0.0, 0.0); 2];
        let mut h2 = vec![Complex64::new(0.0, 0.0); 2];
        h1[0] = Complex64::new(1.0, 0.0);
        h2[1] = Complex64::new(2.0, 0.0);
        let model = deterministic_model(vec![h1, h2], 1.0);
        let ens = build_ensemble(model, 2, &SeededRng::new(0, 0)).unwrap();
        let targets = QosTargets::from_mmse(&[0.5, 0.4]).unwrap();
        let opts = SolverOptions {
            tolerance: 1e-9,
            max_iterations: 5000,
            ..Default::default()
        };
        let res = solve(&ens, &targets, &opts).unwrap();
        assert_eq!(res.trajectory.termination, Termination::Converged);
        // independent single-user closed forms
        assert_abs_diff_eq!(res.power.as_slice()[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(res.power.as_slice()[1], (1.0 / 0.4 - 1.0) / 4.0, epsilon = 1e-6);
    }

    #[test]
    fn power_update_fixed_point_and_monotonicity() {
        // scalar stationary point: mu = Theta = 1, eps = 0.5, xi = 1
        let stats = MacStatistics {
            mus: vec![vec![Complex64::new(1.0, 0.0)]],
            thetas: vec![CMat::identity(1)],
        };
        let xi = PowerAllocation::new(vec![1.0]);
        let g = vec![vec![Complex64::new(1.0, 0.0)]];
        let targets = QosTargets::from_mmse(&[0.5]).unwrap();
        let next = power_update(&xi, &g, &stats, &targets).unwrap();
        assert_abs_diff_eq!(next.as_slice()[0], 1.0, epsilon = 1e-12);
        // relaxing the target strictly lowers the update
        let relaxed = QosTargets::from_mmse(&[0.8]).unwrap();
        let lower = power_update(&xi, &g, &stats, &relaxed).unwrap();
        assert!(lower.as_slice()[0] < next.as_slice()[0]);
    }

    #[test]
    fn trajectories_are_deterministic() {
        let mut rng = SeededRng::new(100, 0);
        let means = (0..2)
            .map(|_| (0..2).map(|_| rng.next_complex_normal()).collect())
            .collect();
        let model = ChannelModel::new(means, vec![CMat::identity(2); 2], vec![1.0; 2]).unwrap();
        let ens = build_ensemble(model, 64, &SeededRng::new(101, 0)).unwrap();
        let targets = QosTargets::from_mmse(&[0.7, 0.8]).unwrap();
        let opts = SolverOptions::default();
        let a = solve(&ens, &targets, &opts).unwrap();
        let b = solve(&ens, &targets, &opts).unwrap();
        assert_eq!(a.trajectory.records.len(), b.trajectory.records.len());
        for (ra, rb) in a.trajectory.records.iter().zip(&b.trajectory.records) {
            assert!(ra
                .xi
                .iter()
                .zip(&rb.xi)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
            assert!(ra
                .rate_mc
                .iter()
                .zip(&rb.rate_mc)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn warm_start_at_optimum_converges_immediately() {
        let model = deterministic_model(vec![vec![Complex64::new(1.0, 0.0)]], 1.0);
        let ens = build_ensemble(model, 2, &SeededRng::new(0, 0)).unwrap();
        let targets = QosTargets::from_mmse(&[0.5]).unwrap();
        let opts = SolverOptions {
            tolerance: 1e-7,
            max_iterations: 3000,
            ..Default::default()
        };
        let first = solve(&ens, &targets, &opts).unwrap();
        let second =
            solve_with_init(&ens, &targets, &opts, first.bc_filters.precoders.clone()).unwrap();
        assert_eq!(second.trajectory.termination, Termination::Converged);
        assert!(second.trajectory.iterations() <= 2);
    }

    #[test]
    fn infeasible_targets_diverge() {
        // two users on one antenna: the sum MMSE cannot drop below K - N = 1,
        // so eps = (0.3, 0.3) is unreachable at any power
        let mut rng = SeededRng::new(5, 0);
        let means = (0..2).map(|_| vec![rng.next_complex_normal()]).collect();
        let model = ChannelModel::new(means, vec![CMat::identity(1); 2], vec![1.0; 2]).unwrap();
        let ens = build_ensemble(model, 256, &SeededRng::new(6, 0)).unwrap();
        let targets = QosTargets::from_mmse(&[0.3, 0.3]).unwrap();
        let res = solve(&ens, &targets, &SolverOptions::default()).unwrap();
        assert_eq!(res.trajectory.termination, Termination::Diverged);
    }

    #[test]
    fn mismatched_targets_rejected() {
        let model = deterministic_model(vec![vec![Complex64::new(1.0, 0.0)]], 1.0);
        let ens = build_ensemble(model, 2, &SeededRng::new(0, 0)).unwrap();
        let targets = QosTargets::from_mmse(&[0.5, 0.5]).unwrap();
        assert!(matches!(
            solve(&ens, &targets, &SolverOptions::default()),
            Err(SolveError::InvalidInput(_))
        ));
    }
}
