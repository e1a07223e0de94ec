//! Feasibility machinery for the QoS targets: the sum-MMSE lower bound and
//! polytope test, the per-user fixed-point map with its closed form at zero
//! power, numeric checks of the fixed-point existence conditions, and the
//! boundary characterization via SIR balancing when there are fewer antennas
//! than users.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelEnsemble;
use crate::mac_model::{mac_statistics, MacError, MacFilterSet, MacStatistics, PowerAllocation};
use crate::numerics::{eigh, hdot, hermitian_solve_vec, norm_sq, CMat, SpectralInverse};
use crate::power_min::QosTargets;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeasibilityError {
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error("user {user} has a vanishing mean direction")]
    DegenerateUser { user: usize },
    #[error("no boundary solution: K - tr(X) = {value} is outside (0, K)")]
    NoSolution { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseMethod {
    DirectInverse,
    PseudoInverse,
}

impl InverseMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            InverseMethod::DirectInverse => "direct-inverse",
            InverseMethod::PseudoInverse => "pseudo-inverse",
        }
    }
}

/// `tr(X)` where `X = E[Y^H] (E[Y Y^H])^+ E[Y]` and `Y` stacks the dual
/// channels weighted by the normalized precoders. Lies in `[0, K]`; `K`
/// minus this value lower-bounds the achievable sum average MMSE.
#[derive(Debug, Clone)]
pub struct TraceBound {
    pub value: f64,
    pub method: InverseMethod,
}

/// Verdict of the polytope membership test for a target tuple.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub trace_bound: f64,
    /// `sum eps_k - (K - tr(X))`; positive means strictly inside.
    pub slack: f64,
    pub feasible: bool,
    pub method: InverseMethod,
}

/// Computes the sum-MMSE trace bound from the normalized precoders of the
/// supplied filter set. The value is invariant to per-user rescaling of the
/// precoder samples.
pub fn trace_bound(
    ensemble: &ChannelEnsemble,
    filters: &MacFilterSet,
) -> Result<TraceBound, FeasibilityError> {
    let stats = mac_statistics(ensemble, filters)?;
    Ok(trace_bound_from_stats(&stats))
}

pub fn trace_bound_from_stats(stats: &MacStatistics) -> TraceBound {
    let n = stats.num_antennas();
    let mut gram = CMat::zeros(n, n);
    for theta in &stats.thetas {
        gram.add_assign_mat(theta);
    }
    let inv = SpectralInverse::new(&gram);
    let value = stats.mus.iter().map(|mu| inv.quad(mu)).sum();
    TraceBound {
        value,
        method: if inv.pseudo {
            InverseMethod::PseudoInverse
        } else {
            InverseMethod::DirectInverse
        },
    }
}

/// Strict polytope membership: the targets are feasible iff
/// `sum eps_k > K - tr(X)`.
pub fn polytope_test(targets: &QosTargets, bound: &TraceBound) -> FeasibilityReport {
    let k = targets.len() as f64;
    let sum_eps: f64 = targets.mmse().iter().sum();
    let slack = sum_eps - (k - bound.value);
    FeasibilityReport {
        trace_bound: bound.value,
        slack,
        feasible: slack > 0.0,
        method: bound.method,
    }
}

/// Per-user data for the fixed-point map: mean directions, scatter matrices
/// (conditional covariance of the weighted dual channel), and the dual noise
/// variance.
#[derive(Debug, Clone)]
pub struct FixedPointContext {
    pub phis: Vec<Vec<Complex64>>,
    pub scatters: Vec<CMat>,
    pub noise_var: f64,
}

impl FixedPointContext {
    /// Splits the sample second moments into mean and scatter parts:
    /// `phi_k = mu_k`, `Scatter_k = Theta_k - mu_k mu_k^H`. The dual noise
    /// variance is one by the dual-channel normalization.
    pub fn from_statistics(stats: &MacStatistics) -> Self {
        let phis = stats.mus.clone();
        let scatters = stats
            .thetas
            .iter()
            .zip(&stats.mus)
            .map(|(theta, mu)| {
                let mut s = theta.clone();
                s.add_outer_scaled(mu, -1.0);
                s
            })
            .collect();
        FixedPointContext {
            phis,
            scatters,
            noise_var: 1.0,
        }
    }

    pub fn from_ensemble(
        ensemble: &ChannelEnsemble,
        filters: &MacFilterSet,
    ) -> Result<Self, FeasibilityError> {
        let stats = mac_statistics(ensemble, filters)?;
        Ok(FixedPointContext::from_statistics(&stats))
    }

    pub fn num_users(&self) -> usize {
        self.phis.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.phis[0].len()
    }

    /// `A_k = sum_i xi_i Scatter_i + sum_{j != k} xi_j phi_j phi_j^H +
    /// noise_var I`.
    fn assemble(&self, xi: &[f64], k: usize) -> CMat {
        let n = self.num_antennas();
        let mut a = CMat::identity(n);
        a.scale(self.noise_var);
        for (i, s) in self.scatters.iter().enumerate() {
            if xi[i] != 0.0 {
                a.add_scaled_mat(s, xi[i]);
            }
        }
        for (j, phi) in self.phis.iter().enumerate() {
            if j != k && xi[j] != 0.0 {
                a.add_outer_scaled(phi, xi[j]);
            }
        }
        a
    }
}

/// The per-user map `f_k(xi) = (1/eps_k - 1) / (phi_k^H A_k^{-1} phi_k)`.
/// At `xi = 0` this reduces to the closed form
/// `(1 - eps_k)/eps_k * noise_var / ||phi_k||^2`.
pub fn fixed_point_map(
    xi: &PowerAllocation,
    targets: &QosTargets,
    ctx: &FixedPointContext,
) -> Result<PowerAllocation, FeasibilityError> {
    let mut out = Vec::with_capacity(ctx.num_users());
    for k in 0..ctx.num_users() {
        if norm_sq(&ctx.phis[k]) == 0.0 {
            return Err(FeasibilityError::DegenerateUser { user: k });
        }
        let a = ctx.assemble(xi.as_slice(), k);
        let sol = hermitian_solve_vec(&a, &ctx.phis[k])
            .expect("A_k is positive definite for positive noise");
        let quad = hdot(&ctx.phis[k], &sol).re;
        let eps = targets.mmse()[k];
        out.push((1.0 / eps - 1.0) / quad);
    }
    Ok(PowerAllocation::new(out))
}

/// Numeric check of the three fixed-point existence conditions: the map is
/// non-negative at zero, exceeds some small uniform allocation, and drops
/// below some larger uniform allocation.
#[derive(Debug, Clone)]
pub struct FixedPointConditions {
    /// f(0) >= 0 component-wise.
    pub nonnegative_at_zero: bool,
    /// The small uniform level `a` used for the second condition.
    pub lower_probe: f64,
    /// f(a 1) > a 1 component-wise.
    pub exceeds_lower_probe: bool,
    /// Uniform level at which f(b 1) < b 1 was verified, if any.
    pub upper_probe: Option<f64>,
    /// Whether the upper verification used the orthogonal-projection bound
    /// (available when N >= K) instead of direct evaluation.
    pub upper_via_projection: bool,
}

impl FixedPointConditions {
    pub fn all_verified(&self) -> bool {
        self.nonnegative_at_zero && self.exceeds_lower_probe && self.upper_probe.is_some()
    }
}

/// Upper bound on `f_k` at a given allocation for `N >= K`: project out the
/// other users' mean directions after whitening by the scatter-plus-noise
/// matrix. Returns `None` when the projection system is singular.
fn projection_upper_bound(
    ctx: &FixedPointContext,
    targets: &QosTargets,
    xi: &[f64],
) -> Option<Vec<f64>> {
    let n = ctx.num_antennas();
    let k_users = ctx.num_users();
    let mut phi_mat = CMat::identity(n);
    phi_mat.scale(ctx.noise_var);
    for (i, s) in ctx.scatters.iter().enumerate() {
        if xi[i] != 0.0 {
            phi_mat.add_scaled_mat(s, xi[i]);
        }
    }
    // whitening transform phi_mat^{-1/2}
    let eig = eigh(&phi_mat);
    if eig.values.iter().any(|&l| l <= 0.0) {
        return None;
    }
    let whiten = |v: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let mut proj = Complex64::new(0.0, 0.0);
            for i in 0..n {
                proj += eig.vectors.at(i, j).conj() * v[i];
            }
            let scaled = proj / eig.values[j].sqrt();
            for i in 0..n {
                out[i] += eig.vectors.at(i, j) * scaled;
            }
        }
        out
    };
    let psis: Vec<Vec<Complex64>> = ctx.phis.iter().map(|p| whiten(p)).collect();
    let mut bounds = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let others: Vec<&Vec<Complex64>> =
            (0..k_users).filter(|&j| j != k).map(|j| &psis[j]).collect();
        let resid_sq = if others.is_empty() {
            norm_sq(&psis[k])
        } else {
            // Gram system (D^H D) c = D^H psi_k
            let cols = others.len();
            let gram = CMat::from_fn(cols, cols, |i, j| hdot(others[i], others[j]));
            let rhs: Vec<Complex64> = others.iter().map(|o| hdot(o, &psis[k])).collect();
            let coef = hermitian_solve_vec(&gram, &rhs).ok()?;
            let mut resid = psis[k].clone();
            for (c, o) in coef.iter().zip(&others) {
                for (r, oi) in resid.iter_mut().zip(o.iter()) {
                    *r -= c * oi;
                }
            }
            norm_sq(&resid)
        };
        if resid_sq <= 0.0 {
            return None;
        }
        let eps = targets.mmse()[k];
        bounds.push((1.0 / eps - 1.0) / resid_sq);
    }
    Some(bounds)
}

/// Probes the three conditions. The lower probe is half the smallest entry of
/// `f(0)`; the upper search tries `probe_scale * 2^j` for `j = 0..=40`,
/// falling back to the projection bound when direct evaluation fails and the
/// antenna count allows it. An unverified upper condition is evidence that
/// the targets are infeasible.
pub fn check_fixed_point_conditions(
    targets: &QosTargets,
    ctx: &FixedPointContext,
    probe_scale: f64,
) -> Result<FixedPointConditions, FeasibilityError> {
    let k_users = ctx.num_users();
    let zero = PowerAllocation::new(vec![0.0; k_users]);
    let f0 = fixed_point_map(&zero, targets, ctx)?;
    let nonnegative_at_zero = f0.as_slice().iter().all(|&x| x >= 0.0);
    let min_f0 = f0.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    let lower_probe = 0.5 * min_f0;
    let fa = fixed_point_map(
        &PowerAllocation::new(vec![lower_probe; k_users]),
        targets,
        ctx,
    )?;
    let exceeds_lower_probe = fa.as_slice().iter().all(|&x| x > lower_probe);

    let mut upper_probe = None;
    let mut upper_via_projection = false;
    for j in 0..=40u32 {
        let b = probe_scale * f64::from(2u32).powi(j as i32);
        let fb = fixed_point_map(&PowerAllocation::new(vec![b; k_users]), targets, ctx)?;
        if fb.as_slice().iter().all(|&x| x < b) {
            upper_probe = Some(b);
            break;
        }
        if ctx.num_antennas() >= k_users {
            if let Some(ub) = projection_upper_bound(ctx, targets, &vec![b; k_users]) {
                if ub.iter().all(|&x| x < b) {
                    upper_probe = Some(b);
                    upper_via_projection = true;
                    break;
                }
            }
        }
    }
    Ok(FixedPointConditions {
        nonnegative_at_zero,
        lower_probe,
        exceeds_lower_probe,
        upper_probe,
        upper_via_projection,
    })
}

/// Boundary characterization: at the feasibility boundary the powers grow
/// without bound and the MMSE tuple is set by signal-to-interference ratios
/// alone. Finds the balance level `r` solving
/// `sum_k 1/(1 + r sir0_k) = K - tr(X)` by bisection and the simplex
/// allocation balancing the SIRs at ratio `r* sir0` by normalized fixed-point
/// iteration. Returns `(r*, b0)`.
pub fn boundary_sir_balance(
    ensemble: &ChannelEnsemble,
    filters: &MacFilterSet,
    sir_directions: &[f64],
) -> Result<(f64, Vec<f64>), FeasibilityError> {
    let stats = mac_statistics(ensemble, filters)?;
    let ctx = FixedPointContext::from_statistics(&stats);
    let k_users = ctx.num_users();
    assert_eq!(sir_directions.len(), k_users, "one SIR weight per user");
    assert!(
        sir_directions.iter().all(|&s| s > 0.0),
        "SIR weights must be positive"
    );
    let bound = trace_bound_from_stats(&stats);
    let target = k_users as f64 - bound.value;
    if !(target > 0.0 && target < k_users as f64) {
        return Err(FeasibilityError::NoSolution { value: target });
    }

    // monotone decreasing left side; bracket then bisect
    let lhs = |r: f64| -> f64 {
        sir_directions
            .iter()
            .map(|&s| 1.0 / (1.0 + r * s))
            .sum::<f64>()
    };
    let mut hi = 1.0;
    let mut doublings = 0;
    while lhs(hi) >= target {
        hi *= 2.0;
        doublings += 1;
        assert!(doublings < 200, "SIR balance bracket failed to close");
    }
    let mut lo = 1e-12;
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_star = 0.5 * (lo + hi);

    // normalized fixed-point iteration on the simplex (zero-noise limit)
    let mut b0 = vec![1.0 / k_users as f64; k_users];
    for _ in 0..10_000 {
        let mut next = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let n = ctx.num_antennas();
            let mut omega = CMat::zeros(n, n);
            for (i, s) in ctx.scatters.iter().enumerate() {
                omega.add_scaled_mat(s, b0[i]);
            }
            for (j, phi) in ctx.phis.iter().enumerate() {
                if j != k {
                    omega.add_outer_scaled(phi, b0[j]);
                }
            }
            let inv = SpectralInverse::new(&omega);
            let quad = inv.quad(&ctx.phis[k]);
            if quad <= 0.0 {
                return Err(FeasibilityError::DegenerateUser { user: k });
            }
            // Q_k(b0) = 1/quad; update toward r* sir0_k Q_k
            next.push(r_star * sir_directions[k] / quad);
        }
        let sum: f64 = next.iter().sum();
        for x in next.iter_mut() {
            *x /= sum;
        }
        let delta: f64 = next.iter().zip(&b0).map(|(a, b)| (a - b).abs()).sum();
        b0 = next;
        if delta <= 1e-10 {
            break;
        }
    }
    Ok((r_star, b0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_ensemble, ChannelModel};
    use crate::numerics::SeededRng;
    use approx::assert_abs_diff_eq;

    fn scalar_ensemble(mean: f64, scatter: f64, m_count: usize, seed: u64) -> ChannelEnsemble {
        let mut cov = CMat::zeros(1, 1);
        *cov.at_mut(0, 0) = Complex64::new(scatter, 0.0);
        let model = ChannelModel::new(
            vec![vec![Complex64::new(mean, 0.0)]],
            vec![cov],
            vec![1.0],
        )
        .unwrap();
        build_ensemble(model, m_count, &SeededRng::new(seed, 0)).unwrap()
    }

    #[test]
    fn deterministic_scalar_trace_is_one() {
        let ens = scalar_ensemble(1.0, 0.0, 8, 0);
        let filters = MacFilterSet::unit_precoders(1, 1, 8);
        let tb = trace_bound(&ens, &filters).unwrap();
        assert_abs_diff_eq!(tb.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scalar_trace_bound_closed_form() {
        // mean 1, scatter 1: tr(X) -> |m|^2/(|m|^2 + c) = 0.5, infimum MMSE 0.5
        let ens = scalar_ensemble(1.0, 1.0, 100_000, 3);
        let filters = MacFilterSet::unit_precoders(1, 1, 100_000);
        let tb = trace_bound(&ens, &filters).unwrap();
        assert!((tb.value - 0.5).abs() / 0.5 < 0.02, "got {}", tb.value);
    }

    #[test]
    fn perfect_csi_trace_equals_user_count() {
        // K <= N, linearly independent deterministic channels
        let mut rng = SeededRng::new(9, 0);
        for (k_users, n) in [(2usize, 2usize), (2, 3), (3, 4)] {
            let means: Vec<Vec<Complex64>> = (0..k_users)
                .map(|_| (0..n).map(|_| rng.next_complex_normal()).collect())
                .collect();
            let model =
                ChannelModel::new(means, vec![CMat::zeros(n, n); k_users], vec![1.0; k_users])
                    .unwrap();
            let ens = build_ensemble(model, 4, &SeededRng::new(0, 0)).unwrap();
            let filters = MacFilterSet::unit_precoders(k_users, n, 4);
            let tb = trace_bound(&ens, &filters).unwrap();
            assert!(
                (tb.value - k_users as f64).abs() <= 1e-9,
                "K={k_users} N={n}: {}",
                tb.value
            );
        }
    }

    #[test]
    fn trace_bound_invariant_to_precoder_rescaling() {
        let ens = scalar_ensemble(1.0, 1.0, 256, 5);
        let filters = MacFilterSet::unit_precoders(1, 1, 256);
        let a = trace_bound(&ens, &filters).unwrap().value;
        let scaled = MacFilterSet::from_parts(
            filters.receivers.clone(),
            filters
                .precoder_samples
                .iter()
                .map(|row| row.iter().map(|t| t * 7.5).collect())
                .collect(),
        );
        let b = trace_bound(&ens, &scaled).unwrap().value;
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn polytope_verdicts() {
        let bound = TraceBound {
            value: 0.5,
            method: InverseMethod::DirectInverse,
        };
        // K = 1, infimum 0.5: eps = 0.6 feasible, eps = 0.4 not
        let feasible = polytope_test(&QosTargets::from_mmse(&[0.6]).unwrap(), &bound);
        assert!(feasible.feasible);
        assert_abs_diff_eq!(feasible.slack, 0.1, epsilon = 1e-12);
        let infeasible = polytope_test(&QosTargets::from_mmse(&[0.4]).unwrap(), &bound);
        assert!(!infeasible.feasible);

        // perfect CSI with K <= N: everything in (0,1)^K is feasible
        let full = TraceBound {
            value: 2.0,
            method: InverseMethod::DirectInverse,
        };
        let t = QosTargets::from_mmse(&[0.05, 0.01]).unwrap();
        assert!(polytope_test(&t, &full).feasible);

        // zero-rate targets are feasible for any positive bound
        let weak = TraceBound {
            value: 0.01,
            method: InverseMethod::DirectInverse,
        };
        let ones = QosTargets::from_mmse(&[1.0, 1.0]).unwrap();
        assert!(polytope_test(&ones, &weak).feasible);
    }

    #[test]
    fn fixed_point_map_closed_form_at_zero() {
        // eps = 0.5, noise 1, ||phi||^2 = 1 -> f(0) = 1
        let ctx = FixedPointContext {
            phis: vec![vec![Complex64::new(1.0, 0.0)]],
            scatters: vec![CMat::zeros(1, 1)],
            noise_var: 1.0,
        };
        let targets = QosTargets::from_mmse(&[0.5]).unwrap();
        let f0 = fixed_point_map(&PowerAllocation::new(vec![0.0]), &targets, &ctx).unwrap();
        assert_abs_diff_eq!(f0.as_slice()[0], 1.0, epsilon = 1e-13);
        // general closed form across users
        let ctx2 = FixedPointContext {
            phis: vec![
                vec![Complex64::new(0.0, 2.0)],
            ],
            scatters: vec![CMat::zeros(1, 1)],
            noise_var: 3.0,
        };
        let t2 = QosTargets::from_mmse(&[0.25]).unwrap();
        let f0 = fixed_point_map(&PowerAllocation::new(vec![0.0]), &t2, &ctx2).unwrap();
        assert_abs_diff_eq!(f0.as_slice()[0], 3.0 * 3.0 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn fixed_point_of_map_matches_power_min_closed_form() {
        // deterministic scalar: fixed point of f is (1/eps - 1) sigma^2/|phi|^2
        let ctx = FixedPointContext {
            phis: vec![vec![Complex64::new(1.0, 0.0)]],
            scatters: vec![CMat::zeros(1, 1)],
            noise_var: 1.0,
        };
        let targets = QosTargets::from_mmse(&[0.5]).unwrap();
        // iterate to the fixed point
        let mut xi = PowerAllocation::new(vec![0.0]);
        for _ in 0..200 {
            xi = fixed_point_map(&xi, &targets, &ctx).unwrap();
        }
        assert_abs_diff_eq!(xi.as_slice()[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn map_is_monotone_and_lower_bounded() {
        let ens = scalar_ensemble(1.0, 0.5, 128, 11);
        let filters = MacFilterSet::unit_precoders(1, 1, 128);
        let ctx = FixedPointContext::from_ensemble(&ens, &filters).unwrap();
        let targets = QosTargets::from_mmse(&[0.6]).unwrap();
        let f0 = fixed_point_map(&PowerAllocation::new(vec![0.0]), &targets, &ctx).unwrap();
        let mut rng = SeededRng::new(12, 0);
        for _ in 0..100 {
            let x = 10.0 * rng.next_uniform();
            let y = x + 5.0 * rng.next_uniform();
            let fx = fixed_point_map(&PowerAllocation::new(vec![x]), &targets, &ctx).unwrap();
            let fy = fixed_point_map(&PowerAllocation::new(vec![y]), &targets, &ctx).unwrap();
            assert!(fy.as_slice()[0] >= fx.as_slice()[0] - 1e-13);
            assert!(fx.as_slice()[0] >= f0.as_slice()[0] - 1e-13);
        }
    }

    #[test]
    fn conditions_feasible_scalar() {
        let ens = scalar_ensemble(1.0, 1.0, 4096, 23);
        let filters = MacFilterSet::unit_precoders(1, 1, 4096);
        let ctx = FixedPointContext::from_ensemble(&ens, &filters).unwrap();
        let feasible = QosTargets::from_mmse(&[0.6]).unwrap();
        let c = check_fixed_point_conditions(&feasible, &ctx, 1.0).unwrap();
        assert!(c.all_verified(), "{c:?}");
        let infeasible = QosTargets::from_mmse(&[0.4]).unwrap();
        let c = check_fixed_point_conditions(&infeasible, &ctx, 1.0).unwrap();
        assert!(c.nonnegative_at_zero && c.exceeds_lower_probe);
        assert!(c.upper_probe.is_none(), "{c:?}");
    }

    #[test]
    fn conditions_trivial_for_weak_targets() {
        let ens = scalar_ensemble(1.0, 1.0, 512, 29);
        let filters = MacFilterSet::unit_precoders(1, 1, 512);
        let ctx = FixedPointContext::from_ensemble(&ens, &filters).unwrap();
        let weak = QosTargets::from_mmse(&[0.999]).unwrap();
        let c = check_fixed_point_conditions(&weak, &ctx, 1.0).unwrap();
        assert!(c.all_verified());
        // f(0) -> 0 as eps -> 1
        let f0 = fixed_point_map(
            &PowerAllocation::new(vec![0.0]),
            &weak,
            &ctx,
        )
        .unwrap();
        assert!(f0.as_slice()[0] < 0.01);
    }

    fn crowded_ensemble(seed: u64) -> (ChannelEnsemble, MacFilterSet) {
        // K = 3 users on N = 2 antennas with scatter: boundary exists
        let mut rng = SeededRng::new(seed, 0);
        let means: Vec<Vec<Complex64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.next_complex_normal()).collect())
            .collect();
        let model = ChannelModel::new(means, vec![CMat::identity(2); 3], vec![1.0; 3]).unwrap();
        let ens = build_ensemble(model, 512, &SeededRng::new(seed + 1, 0)).unwrap();
        let filters = MacFilterSet::unit_precoders(3, 2, 512);
        (ens, filters)
    }

    #[test]
    fn boundary_balance_residual_and_monotonicity() {
        let (ens, filters) = crowded_ensemble(31);
        let stats = mac_statistics(&ens, &filters).unwrap();
        let bound = trace_bound_from_stats(&stats);
        let target = 3.0 - bound.value;
        let sir0 = vec![1.0, 2.0, 0.5];
        let (r_star, b0) = boundary_sir_balance(&ens, &filters, &sir0).unwrap();
        let lhs: f64 = sir0.iter().map(|&s| 1.0 / (1.0 + r_star * s)).sum();
        assert_abs_diff_eq!(lhs, target, epsilon = 1e-8);
        // left side strictly decreasing in r
        let lhs2: f64 = sir0.iter().map(|&s| 1.0 / (1.0 + 2.0 * r_star * s)).sum();
        assert!(lhs2 < lhs);
        // simplex allocation
        assert_abs_diff_eq!(b0.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(b0.iter().all(|&x| x > 0.0));
        // balanced ratios: SIR_k / sir0_k equal across users at the fixed point
        let ctx = FixedPointContext::from_statistics(&stats);
        let ratios: Vec<f64> = (0..3)
            .map(|k| {
                let mut omega = CMat::zeros(2, 2);
                for (i, s) in ctx.scatters.iter().enumerate() {
                    omega.add_scaled_mat(s, b0[i]);
                }
                for (j, phi) in ctx.phis.iter().enumerate() {
                    if j != k {
                        omega.add_outer_scaled(phi, b0[j]);
                    }
                }
                let inv = SpectralInverse::new(&omega);
                b0[k] * inv.quad(&ctx.phis[k]) / sir0[k]
            })
            .collect();
        for r in &ratios {
            assert_abs_diff_eq!(*r, ratios[0], epsilon = 1e-6 * ratios[0]);
        }
    }

    #[test]
    fn symmetric_users_get_uniform_allocation() {
        // three users sharing one deterministic channel: exact symmetry, so
        // the balanced allocation is uniform and r* solves 3/(1+r) = K - tr(X)
        let mean = vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)];
        let model = ChannelModel::new(
            vec![mean.clone(), mean.clone(), mean],
            vec![CMat::zeros(2, 2); 3],
            vec![1.0; 3],
        )
        .unwrap();
        let ens = build_ensemble(model, 16, &SeededRng::new(40, 0)).unwrap();
        let filters = MacFilterSet::unit_precoders(3, 2, 16);
        let bound = trace_bound(&ens, &filters).unwrap();
        assert_abs_diff_eq!(bound.value, 1.0, epsilon = 1e-10);
        let (r_star, b0) = boundary_sir_balance(&ens, &filters, &[1.0; 3]).unwrap();
        assert_abs_diff_eq!(r_star, 0.5, epsilon = 1e-8);
        for &x in &b0 {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn two_user_single_antenna_oracle() {
        // K = 2, N = 1: scalar closed forms for the balance level
        let mut rng = SeededRng::new(55, 0);
        let means: Vec<Vec<Complex64>> = (0..2)
            .map(|_| vec![rng.next_complex_normal() * 2.0])
            .collect();
        let model = ChannelModel::new(means, vec![CMat::identity(1); 2], vec![1.0; 2]).unwrap();
        let ens = build_ensemble(model, 1024, &SeededRng::new(56, 0)).unwrap();
        let filters = MacFilterSet::unit_precoders(2, 1, 1024);
        let sir0 = vec![1.0, 3.0];
        let (r_star, _b0) = boundary_sir_balance(&ens, &filters, &sir0).unwrap();
        // independent bisection oracle on the same equation
        let bound = trace_bound(&ens, &filters).unwrap();
        let target = 2.0 - bound.value;
        let f = |r: f64| 1.0 / (1.0 + r * sir0[0]) + 1.0 / (1.0 + r * sir0[1]) - target;
        let mut lo = 0.0;
        let mut hi = 1.0;
        while f(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(r_star, 0.5 * (lo + hi), epsilon = 1e-8 * r_star.max(1.0));
    }

    #[test]
    fn degenerate_boundary_rejected() {
        // perfect CSI K <= N: tr(X) = K, no boundary
        let means = vec![
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ];
        let model = ChannelModel::new(means, vec![CMat::zeros(2, 2); 2], vec![1.0; 2]).unwrap();
        let ens = build_ensemble(model, 4, &SeededRng::new(0, 0)).unwrap();
        let filters = MacFilterSet::unit_precoders(2, 2, 4);
        assert!(matches!(
            boundary_sir_balance(&ens, &filters, &[1.0, 1.0]),
            Err(FeasibilityError::NoSolution { .. })
        ));
    }
}
