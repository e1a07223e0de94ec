//! Command implementations. Each returns a process exit code; hard errors
//! (config, I/O, numerical degeneracies) bubble up as `anyhow` errors and
//! the binary maps them to exit code 1 with a diagnostic line.

use anyhow::{bail, Context, Result};
use std::path::{Path, PathBuf};

use misoqos_core::analysis::{
    beta_fit, gap_estimate, gap_estimate_exact, sample_siso_mmse, sinr_approx_rate, BetaFit,
};
use misoqos_core::balancing::{balance, scaled_targets, BalanceError, BalanceOptions};
use misoqos_core::bc_model::{avg_mse_conditional, avg_rate, mmse_receivers, BcFilterSet};
use misoqos_core::channel::ChannelEnsemble;
use misoqos_core::duality::bc_to_mac;
use misoqos_core::feasibility::{polytope_test, trace_bound, FeasibilityReport};
use misoqos_core::mac_model::MacFilterSet;
use misoqos_core::numerics::{from_db, to_db, SeededRng};
use misoqos_core::power_min::{solve, QosTargets, SolveResult, Termination};

use crate::config::ScenarioConfig;
use crate::exit_code;
use crate::output::{fmt_f64, write_csv};
use crate::record::{sha256_hex, RunRecord};

#[derive(Debug, Clone)]
pub struct PowerMinArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub eval_ensemble_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct BalanceArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub ptx_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FeasibilityArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub tau_from_solver: bool,
}

#[derive(Debug, Clone, Default)]
pub struct GapArgs {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub p2: Option<f64>,
    pub sigma2: Option<f64>,
    pub count: Option<f64>,
    pub seed: u64,
}

fn exit_for(termination: Termination) -> i32 {
    match termination {
        Termination::Converged => exit_code::OK,
        Termination::Diverged => exit_code::DIVERGED,
        Termination::MaxIterations => exit_code::MAX_ITERATIONS,
    }
}

fn solve_from_config(
    config: &ScenarioConfig,
    args: &PowerMinArgs,
) -> Result<(ChannelEnsemble, QosTargets, SolveResult)> {
    let ensemble = config.build_ensemble(args.seed)?;
    let targets = config.qos_targets()?;
    let mut opts = config.solver.to_options();
    if let Some(t) = args.tol {
        opts.tolerance = t;
    }
    if let Some(m) = args.max_iters {
        opts.max_iterations = m;
    }
    let result = solve(&ensemble, &targets, &opts)?;
    Ok((ensemble, targets, result))
}

fn unit_tau_report(ensemble: &ChannelEnsemble, targets: &QosTargets) -> Result<FeasibilityReport> {
    let filters = MacFilterSet::unit_precoders(
        ensemble.num_users(),
        ensemble.num_antennas(),
        ensemble.num_samples(),
    );
    let bound = trace_bound(ensemble, &filters)?;
    Ok(polytope_test(targets, &bound))
}

fn write_trajectory(dir: &Path, result: &SolveResult) -> Result<String> {
    let mut rows = Vec::new();
    for (iter, rec) in result.trajectory.records.iter().enumerate() {
        for user in 0..rec.xi.len() {
            rows.push(vec![
                (iter + 1).to_string(),
                (user + 1).to_string(),
                fmt_f64(rec.mmse[user]),
                fmt_f64(rec.rate_mc[user]),
                fmt_f64(rec.rate_sinr[user]),
                fmt_f64(rec.xi[user]),
                fmt_f64(rec.total_power_db),
            ]);
        }
    }
    write_csv(
        dir.join("trajectory.csv"),
        &[
            "iter",
            "user",
            "mmse",
            "rate_mc",
            "rate_sinr_approx",
            "xi",
            "total_power_db",
        ],
        rows,
    )?;
    Ok("trajectory.csv".into())
}

fn write_summary(
    dir: &Path,
    ensemble: &ChannelEnsemble,
    targets: &QosTargets,
    result: &SolveResult,
    feas: &FeasibilityReport,
) -> Result<String> {
    let total_db = to_db(result.power.total().max(f64::MIN_POSITIVE))?;
    let status = result.trajectory.termination.as_str();
    let iters = result.trajectory.iterations();
    let rows: Vec<Vec<String>> = (0..targets.len())
        .map(|k| {
            vec![
                (k + 1).to_string(),
                fmt_f64(targets.rates()[k]),
                fmt_f64(targets.mmse()[k]),
                fmt_f64(avg_mse_conditional(ensemble, &result.bc_filters, k)),
                fmt_f64(avg_rate(ensemble, &result.bc_filters, k)),
                fmt_f64(result.power.as_slice()[k]),
                fmt_f64(total_db),
                iters.to_string(),
                status.to_string(),
                fmt_f64(feas.trace_bound),
                fmt_f64(feas.slack),
                feas.feasible.to_string(),
            ]
        })
        .collect();
    write_csv(
        dir.join("summary.csv"),
        &[
            "user",
            "rate_target",
            "mmse_target",
            "mmse_final",
            "rate_mc_final",
            "xi_final",
            "total_power_db",
            "iterations",
            "status",
            "feas_trace_bound",
            "feas_slack",
            "feas_feasible",
        ],
        rows,
    )?;
    Ok("summary.csv".into())
}

fn write_filters(dir: &Path, filters: &BcFilterSet) -> Result<String> {
    let mut rows = Vec::new();
    for (k, p) in filters.precoders.iter().enumerate() {
        for (a, x) in p.iter().enumerate() {
            rows.push(vec![
                (k + 1).to_string(),
                (a + 1).to_string(),
                fmt_f64(x.re),
                fmt_f64(x.im),
            ]);
        }
    }
    write_csv(
        dir.join("filters.csv"),
        &["user", "antenna", "re", "im"],
        rows,
    )?;
    Ok("filters.csv".into())
}

fn write_eval(
    dir: &Path,
    config: &ScenarioConfig,
    result: &SolveResult,
    eval_seed: u64,
) -> Result<String> {
    let eval_ens = config.build_ensemble(Some(eval_seed))?;
    let receivers = mmse_receivers(&eval_ens, &result.bc_filters.precoders);
    let filters = BcFilterSet {
        precoders: result.bc_filters.precoders.clone(),
        receivers,
    };
    let rows: Vec<Vec<String>> = (0..eval_ens.num_users())
        .map(|k| {
            vec![
                (k + 1).to_string(),
                fmt_f64(avg_mse_conditional(&eval_ens, &filters, k)),
                fmt_f64(avg_rate(&eval_ens, &filters, k)),
            ]
        })
        .collect();
    write_csv(
        dir.join("eval.csv"),
        &["user", "mmse_eval", "rate_mc_eval"],
        rows,
    )?;
    Ok("eval.csv".into())
}

/// `power-min`: run the solver, emit trajectory/summary/filters CSVs plus a
/// run record. Exit 0 converged, 2 diverged, 3 iteration budget exhausted.
pub fn run_power_min(args: &PowerMinArgs) -> Result<i32> {
    let config = ScenarioConfig::load(&args.config)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let (ensemble, targets, result) = solve_from_config(&config, args)?;
    let feas = unit_tau_report(&ensemble, &targets)?;

    let mut record = RunRecord::new(
        "power-min",
        config.digest(),
        args.seed.unwrap_or(config.seed),
    );
    record.outputs.push(write_trajectory(&args.out, &result)?);
    record
        .outputs
        .push(write_summary(&args.out, &ensemble, &targets, &result, &feas)?);
    record
        .outputs
        .push(write_filters(&args.out, &result.bc_filters)?);
    if let Some(eval_seed) = args.eval_ensemble_seed {
        record
            .outputs
            .push(write_eval(&args.out, &config, &result, eval_seed)?);
    }
    record.status = result.trajectory.termination.as_str().to_string();
    record.write(&args.out)?;
    Ok(exit_for(result.trajectory.termination))
}

/// `compare-sinr`: run the solver, then tabulate the Monte Carlo average
/// rates against the separate-expectation SINR approximation per user.
pub fn run_compare_sinr(args: &PowerMinArgs) -> Result<i32> {
    let config = ScenarioConfig::load(&args.config)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let (ensemble, targets, result) = solve_from_config(&config, args)?;
    let feas = unit_tau_report(&ensemble, &targets)?;

    let mut record = RunRecord::new(
        "compare-sinr",
        config.digest(),
        args.seed.unwrap_or(config.seed),
    );
    record.outputs.push(write_trajectory(&args.out, &result)?);
    record
        .outputs
        .push(write_summary(&args.out, &ensemble, &targets, &result, &feas)?);
    record
        .outputs
        .push(write_filters(&args.out, &result.bc_filters)?);

    let rows: Vec<Vec<String>> = (0..targets.len())
        .map(|k| {
            vec![
                (k + 1).to_string(),
                fmt_f64(targets.rates()[k]),
                fmt_f64(avg_rate(&ensemble, &result.bc_filters, k)),
                fmt_f64(sinr_approx_rate(&result.bc_filters.precoders, &ensemble, k)),
            ]
        })
        .collect();
    write_csv(
        args.out.join("compare_sinr.csv"),
        &["user", "rate_target", "rate_mc", "rate_sinr_approx"],
        rows,
    )?;
    record.outputs.push("compare_sinr.csv".into());
    record.status = result.trajectory.termination.as_str().to_string();
    record.write(&args.out)?;
    Ok(exit_for(result.trajectory.termination))
}

/// `balance`: bisection on the common rate-target scaling under the power
/// budget from the config (or `--ptx-db`).
pub fn run_balance(args: &BalanceArgs) -> Result<i32> {
    let config = ScenarioConfig::load(&args.config)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let balance_cfg = config
        .balance
        .clone()
        .or(args.ptx_db.map(|ptx_db| crate::config::BalanceConfig {
            ptx_db,
            sigma_low: None,
            sigma_high: None,
        }))
        .context("config has no balance section and no --ptx-db given")?;
    let ptx_db = args.ptx_db.unwrap_or(balance_cfg.ptx_db);
    let p_tx = from_db(ptx_db);
    let rates: Vec<f64> = match &config.targets {
        crate::config::TargetSpec::Rates(r) => r.clone(),
        crate::config::TargetSpec::Mmse(e) => e.iter().map(|x| -x.log2()).collect(),
    };
    let bracket = match (balance_cfg.sigma_low, balance_cfg.sigma_high) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => bail!("balance.sigma_low and balance.sigma_high must be given together"),
    };
    let ensemble = config.build_ensemble(args.seed)?;
    let mut opts = BalanceOptions {
        bracket,
        ..Default::default()
    };
    opts.solver.init_seed = config.solver.init_seed;

    let mut record = RunRecord::new("balance", config.digest(), args.seed.unwrap_or(config.seed));
    let outcome = balance(&ensemble, &rates, p_tx, &opts);
    let result = match outcome {
        Ok(r) => r,
        Err(BalanceError::BracketFailure(msg)) => {
            record.status = format!("bracket_failure: {msg}");
            record.write(&args.out)?;
            eprintln!("balance: bracket failure: {msg}");
            return Ok(exit_code::DIVERGED);
        }
        Err(BalanceError::MaxBisections(n)) => {
            record.status = format!("max_bisections: {n}");
            record.write(&args.out)?;
            eprintln!("balance: no termination within {n} bisections");
            return Ok(exit_code::MAX_ITERATIONS);
        }
        Err(e) => return Err(e.into()),
    };

    let mut rows = Vec::new();
    for it in &result.state.setup {
        rows.push(vec![
            "0".to_string(),
            fmt_f64(it.sigma_low),
            fmt_f64(it.sigma_high),
            fmt_f64(it.candidate),
            fmt_f64(to_db(it.total_power.max(f64::MIN_POSITIVE))?),
        ]);
    }
    for (i, it) in result.state.bisections.iter().enumerate() {
        rows.push(vec![
            (i + 1).to_string(),
            fmt_f64(it.sigma_low),
            fmt_f64(it.sigma_high),
            fmt_f64(it.candidate),
            fmt_f64(to_db(it.total_power.max(f64::MIN_POSITIVE))?),
        ]);
    }
    write_csv(
        args.out.join("balance.csv"),
        &["iter", "sigma_low", "sigma_high", "candidate", "total_power_db"],
        rows,
    )?;
    record.outputs.push("balance.csv".into());

    // summary of the accepted candidate against its scaled targets
    let targets = scaled_targets(&rates, result.sigma)?;
    let total_db = to_db(result.power.total().max(f64::MIN_POSITIVE))?;
    let srows: Vec<Vec<String>> = (0..targets.len())
        .map(|k| {
            vec![
                (k + 1).to_string(),
                fmt_f64(result.sigma),
                fmt_f64(targets.rates()[k]),
                fmt_f64(targets.mmse()[k]),
                fmt_f64(avg_mse_conditional(&ensemble, &result.bc_filters, k)),
                fmt_f64(avg_rate(&ensemble, &result.bc_filters, k)),
                fmt_f64(result.power.as_slice()[k]),
                fmt_f64(total_db),
                fmt_f64(p_tx),
            ]
        })
        .collect();
    write_csv(
        args.out.join("summary.csv"),
        &[
            "user",
            "sigma",
            "rate_target_scaled",
            "mmse_target_scaled",
            "mmse_final",
            "rate_mc_final",
            "xi_final",
            "total_power_db",
            "ptx_linear",
        ],
        srows,
    )?;
    record.outputs.push("summary.csv".into());
    record
        .outputs
        .push(write_filters(&args.out, &result.bc_filters)?);
    record.status = format!("balanced at sigma {}", fmt_f64(result.sigma));
    record.write(&args.out)?;
    println!(
        "sigma {} total_power_db {} bisections {}",
        fmt_f64(result.sigma),
        fmt_f64(total_db),
        result.state.bisections.len()
    );
    Ok(exit_code::OK)
}

/// `feasibility`: polytope membership of the configured targets, printed as
/// one JSON line. Exit 0 feasible, 2 infeasible.
pub fn run_feasibility(args: &FeasibilityArgs) -> Result<i32> {
    let config = ScenarioConfig::load(&args.config)?;
    let ensemble = config.build_ensemble(args.seed)?;
    let targets = config.qos_targets()?;
    let (report, tau_source) = if args.tau_from_solver {
        let result = solve(&ensemble, &targets, &config.solver.to_options())?;
        let (mac, _) = bc_to_mac(&result.bc_filters, &ensemble)?;
        let bound = trace_bound(&ensemble, &mac)?;
        (polytope_test(&targets, &bound), "solver")
    } else {
        (unit_tau_report(&ensemble, &targets)?, "unit")
    };
    let sum_targets: f64 = targets.mmse().iter().sum();
    println!(
        "{}",
        serde_json::json!({
            "trace_bound": report.trace_bound,
            "slack": report.slack,
            "feasible": report.feasible,
            "method": report.method.as_str(),
            "tau_source": tau_source,
            "sum_mmse_targets": sum_targets,
        })
    );
    Ok(if report.feasible {
        exit_code::OK
    } else {
        exit_code::DIVERGED
    })
}

/// `gap`: closed-form gap for explicit shape parameters, or a sampled fit of
/// the scalar-channel MMSE distribution.
pub fn run_gap(args: &GapArgs) -> Result<String> {
    let fit = match (args.alpha, args.beta, args.p2, args.sigma2) {
        (Some(alpha), Some(beta), None, None) => {
            if !(alpha > 0.0) || !(beta > 0.0) {
                bail!("alpha and beta must be positive, got ({alpha}, {beta})");
            }
            BetaFit { alpha, beta }
        }
        (None, None, Some(p2), Some(sigma2)) => {
            if !(p2 > 0.0) || !(sigma2 > 0.0) {
                bail!("p2 and sigma2 must be positive");
            }
            let count = args.count.unwrap_or(1e6);
            if !(count >= 2.0) || !count.is_finite() {
                bail!("count must be at least 2");
            }
            let mut rng = SeededRng::new(args.seed, 0);
            let samples = sample_siso_mmse(p2, sigma2, count as usize, &mut rng);
            beta_fit(&samples)?
        }
        _ => bail!("give either --alpha and --beta, or --p2 and --sigma2 [--count, --seed]"),
    };
    let approx = gap_estimate(&fit)?;
    let exact = gap_estimate_exact(&fit)?;
    Ok(format!(
        "alpha {}\nbeta {}\ngap_bits {}\ngap_bits_exact_digamma {}\n",
        fmt_f64(fit.alpha),
        fmt_f64(fit.beta),
        fmt_f64(approx),
        fmt_f64(exact)
    ))
}

/// Digest used in the gap command's run record (no config file involved).
pub fn gap_args_digest(args: &GapArgs) -> String {
    let value = serde_json::json!({
        "alpha": args.alpha,
        "beta": args.beta,
        "p2": args.p2,
        "sigma2": args.sigma2,
        "count": args.count,
        "seed": args.seed,
    });
    sha256_hex(value.to_string().as_bytes())
}
