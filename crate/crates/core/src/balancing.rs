//! Rate balancing: maximize the common scaling of all per-user rate targets
//! under a total-power budget. A geometric bisection on the scaling level
//! wraps the power-minimization solver; the bracket keeps
//! `power(low) <= budget <= power(high)` invariant, and each inner solve
//! warm-starts from the previous candidate's filters.

use thiserror::Error;

use crate::bc_model::BcFilterSet;
use crate::channel::ChannelEnsemble;
use crate::feasibility::trace_bound;
use crate::mac_model::{MacFilterSet, PowerAllocation};
use crate::power_min::{
    solve, solve_with_init, QosTargets, SolveError, SolverOptions, TargetsError, Termination,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BalanceError {
    #[error("could not bracket the budget: {0}")]
    BracketFailure(String),
    #[error("bisection did not reach the power tolerance within {0} iterations")]
    MaxBisections(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Targets(#[from] TargetsError),
    #[error(transparent)]
    Solver(#[from] SolveError),
}

/// Per-user MMSE targets for scaled rates: `eps_k = 2^(-sigma * rate_k)`.
/// Increasing the level strictly tightens every target.
pub fn scaled_targets(rates: &[f64], sigma: f64) -> Result<QosTargets, TargetsError> {
    let scaled: Vec<f64> = rates.iter().map(|r| sigma * r).collect();
    QosTargets::from_rates(&scaled)
}

#[derive(Debug, Clone)]
pub struct BalanceOptions {
    /// Termination threshold on `|total power - budget|`.
    pub power_tolerance: f64,
    pub max_bisections: usize,
    /// Optional explicit starting bracket `(sigma_low, sigma_high)`.
    pub bracket: Option<(f64, f64)>,
    /// Options for the inner power-minimization solves. The default uses a
    /// tighter convergence threshold than a standalone solve so the inner
    /// power readings stay well below the balancing tolerance.
    pub solver: SolverOptions,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        BalanceOptions {
            power_tolerance: 1e-2,
            max_bisections: 60,
            bracket: None,
            solver: SolverOptions {
                tolerance: 1e-4,
                ..Default::default()
            },
        }
    }
}

/// One inner solve: the bracket in effect, the level evaluated, and the
/// resulting allocation.
#[derive(Debug, Clone)]
pub struct BalanceIteration {
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub candidate: f64,
    pub xi: Vec<f64>,
    pub total_power: f64,
    pub converged: bool,
}

/// Bisection trace: bracket-setup solves followed by the bisection proper.
/// `sigma_low`/`sigma_high` hold the final bracket, whose width at
/// termination is a diagnostic for how tightly the level was pinned.
#[derive(Debug, Clone)]
pub struct BalanceState {
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub setup: Vec<BalanceIteration>,
    pub bisections: Vec<BalanceIteration>,
}

impl BalanceState {
    pub fn final_bracket_width(&self) -> f64 {
        self.sigma_high - self.sigma_low
    }
}

#[derive(Debug, Clone)]
pub struct BalanceResult {
    pub sigma: f64,
    pub bc_filters: BcFilterSet,
    pub power: PowerAllocation,
    pub state: BalanceState,
}

struct Evaluation {
    iteration: BalanceIteration,
    filters: Option<BcFilterSet>,
}

fn evaluate(
    ensemble: &ChannelEnsemble,
    rates: &[f64],
    sigma: f64,
    bracket: (f64, f64),
    opts: &BalanceOptions,
    warm: Option<&BcFilterSet>,
) -> Result<Evaluation, BalanceError> {
    let targets = scaled_targets(rates, sigma)?;
    let result = match warm {
        Some(f) => solve_with_init(ensemble, &targets, &opts.solver, f.precoders.clone())?,
        None => solve(ensemble, &targets, &opts.solver)?,
    };
    let converged = result.trajectory.termination == Termination::Converged;
    Ok(Evaluation {
        iteration: BalanceIteration {
            sigma_low: bracket.0,
            sigma_high: bracket.1,
            candidate: sigma,
            xi: result.power.as_slice().to_vec(),
            total_power: result.power.total(),
            converged,
        },
        filters: converged.then_some(result.bc_filters),
    })
}

/// Largest level at which the scaled targets still pass the polytope test
/// with matched-filter precoders, if the polytope is bounded.
fn polytope_level_cap(ensemble: &ChannelEnsemble, rates: &[f64]) -> Option<f64> {
    let filters = MacFilterSet::unit_precoders(
        ensemble.num_users(),
        ensemble.num_antennas(),
        ensemble.num_samples(),
    );
    let bound = trace_bound(ensemble, &filters).ok()?;
    let infimum = ensemble.num_users() as f64 - bound.value;
    if infimum <= 0.0 {
        return None; // every target tuple is feasible
    }
    // sum 2^(-sigma r_k) is strictly decreasing in sigma; find the root
    let sum_eps = |sigma: f64| -> f64 {
        rates.iter().map(|r| (-sigma * r).exp2()).sum::<f64>()
    };
    let mut hi = 1.0;
    while sum_eps(hi) > infimum {
        hi *= 2.0;
        if hi > 1e9 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum_eps(mid) > infimum {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Maximizes the common rate-target scaling under the total power budget
/// `p_tx` (linear units). Returns the level, the filters of the accepted
/// candidate, its power allocation, and the bisection trace.
pub fn balance(
    ensemble: &ChannelEnsemble,
    rates: &[f64],
    p_tx: f64,
    opts: &BalanceOptions,
) -> Result<BalanceResult, BalanceError> {
    if !(p_tx > 0.0) || !p_tx.is_finite() {
        return Err(BalanceError::InvalidInput(format!(
            "power budget must be positive, got {p_tx}"
        )));
    }
    if rates.is_empty() || rates.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(BalanceError::InvalidInput(
            "rates must be positive and finite".into(),
        ));
    }
    if let Some((lo, hi)) = opts.bracket {
        if !(lo > 0.0 && hi > lo) {
            return Err(BalanceError::InvalidInput(format!(
                "bracket ({lo}, {hi}) must satisfy 0 < low < high"
            )));
        }
    }

    let cap = polytope_level_cap(ensemble, rates);
    let mut setup = Vec::new();
    let mut warm: Option<BcFilterSet> = None;

    let accept = |sigma: f64,
                  ev: Evaluation,
                  state: BalanceState|
     -> Result<BalanceResult, BalanceError> {
        let filters = ev.filters.expect("accepted candidate must have converged");
        Ok(BalanceResult {
            sigma,
            power: PowerAllocation::new(ev.iteration.xi.clone()),
            bc_filters: filters,
            state,
        })
    };

    // establish the low end: a converged solve with power at or below budget
    let (mut lo, mut hi) = opts.bracket.unwrap_or((1.0, 2.0));
    let mut lo_eval = evaluate(ensemble, rates, lo, (lo, hi), opts, warm.as_ref())?;
    setup.push(lo_eval.iteration.clone());
    let mut guard = 0;
    while !(lo_eval.iteration.converged && lo_eval.iteration.total_power <= p_tx) {
        guard += 1;
        if guard > 60 || lo < 1e-9 {
            return Err(BalanceError::BracketFailure(format!(
                "no level with power below the budget down to sigma = {lo}"
            )));
        }
        lo /= 2.0;
        lo_eval = evaluate(ensemble, rates, lo, (lo, hi), opts, warm.as_ref())?;
        setup.push(lo_eval.iteration.clone());
    }
    if (lo_eval.iteration.total_power - p_tx).abs() < opts.power_tolerance {
        let state = BalanceState {
            sigma_low: lo,
            sigma_high: lo,
            setup: setup.clone(),
            bisections: Vec::new(),
        };
        return accept(lo, lo_eval, state);
    }
    if let Some(f) = lo_eval.filters.take() {
        warm = Some(f);
    }

    // establish the high end: a level whose power meets or exceeds the
    // budget. The polytope cap only guides the expansion; the solver can
    // reach levels past the matched-filter polytope estimate, so divergence
    // detection is the authoritative infeasibility signal and shrinks the
    // probe back toward the last good level.
    if hi <= lo {
        hi = lo * 2.0;
    }
    let mut cap = cap;
    let mut hi_eval;
    let mut guard = 0;
    loop {
        guard += 1;
        if guard > 60 {
            return Err(BalanceError::BracketFailure(
                "no feasible level with power above the budget".into(),
            ));
        }
        hi_eval = evaluate(ensemble, rates, hi, (lo, hi), opts, warm.as_ref())?;
        setup.push(hi_eval.iteration.clone());
        if hi_eval.iteration.converged {
            if (hi_eval.iteration.total_power - p_tx).abs() < opts.power_tolerance {
                let state = BalanceState {
                    sigma_low: lo,
                    sigma_high: hi,
                    setup: setup.clone(),
                    bisections: Vec::new(),
                };
                return accept(hi, hi_eval, state);
            }
            if hi_eval.iteration.total_power >= p_tx {
                break;
            }
            // still below budget: move the low end up and expand
            lo = hi;
            if let Some(f) = hi_eval.filters.take() {
                warm = Some(f);
            }
            hi = match cap {
                Some(c) if hi < 0.99 * c => (hi * c).sqrt().min(hi * 2.0),
                Some(_) => {
                    // converged essentially at the cap: the estimate is not
                    // binding for the solver, stop honoring it
                    cap = None;
                    hi * 2.0
                }
                None => hi * 2.0,
            };
        } else {
            // diverged: the level is outside the achievable region
            hi = (lo * hi).sqrt();
        }
    }

    // geometric bisection
    let mut bisections = Vec::new();
    for _ in 0..opts.max_bisections {
        let candidate = (lo * hi).sqrt();
        let mut ev = evaluate(ensemble, rates, candidate, (lo, hi), opts, warm.as_ref())?;
        bisections.push(ev.iteration.clone());
        if !ev.iteration.converged {
            hi = candidate;
            continue;
        }
        let total = ev.iteration.total_power;
        if (total - p_tx).abs() < opts.power_tolerance {
            let state = BalanceState {
                sigma_low: lo,
                sigma_high: hi,
                setup,
                bisections,
            };
            return accept(candidate, ev, state);
        }
        if total < p_tx {
            lo = candidate;
        } else {
            hi = candidate;
        }
        if let Some(f) = ev.filters.take() {
            warm = Some(f);
        }
    }
    Err(BalanceError::MaxBisections(opts.max_bisections))
}
