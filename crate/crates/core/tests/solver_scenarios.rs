//! End-to-end solver behavior on the reference scenario family.

mod common;

use common::{reference_scenario, REFERENCE_MMSE, REFERENCE_RATES};
use misoqos_core::bc_model::{avg_mse_conditional, avg_rate};
use misoqos_core::power_min::{solve, QosTargets, SolverOptions, Termination};

#[test]
fn reference_scenario_converges_to_targets() {
    let ens = reference_scenario(1);
    let targets = QosTargets::from_rates(&REFERENCE_RATES).unwrap();
    let opts = SolverOptions::default();
    let res = solve(&ens, &targets, &opts).unwrap();
    assert_eq!(res.trajectory.termination, Termination::Converged);
    println!(
        "iterations: {}, final power: {:.4} ({:.4} dB)",
        res.trajectory.iterations(),
        res.power.total(),
        res.trajectory.records.last().unwrap().total_power_db
    );
    for k in 0..4 {
        let mmse = avg_mse_conditional(&ens, &res.bc_filters, k);
        let rate = avg_rate(&ens, &res.bc_filters, k);
        println!(
            "user {k}: mmse {mmse:.5} (target {}), rate {rate:.5} (target {})",
            REFERENCE_MMSE[k], REFERENCE_RATES[k]
        );
        assert!(
            (mmse - REFERENCE_MMSE[k]).abs() <= 1e-2,
            "user {k} mmse {mmse} vs target {}",
            REFERENCE_MMSE[k]
        );
        assert!(rate >= REFERENCE_RATES[k], "user {k} rate {rate}");
    }
    // power drops from the initial overshoot to the final value
    let first = res.trajectory.records.first().unwrap();
    let last = res.trajectory.records.last().unwrap();
    assert!(first.total_power_db > last.total_power_db);
}

#[test]
fn mmse_trajectory_overshoots_then_relaxes() {
    // the first iterations push the MMSEs below their targets, later ones
    // relax them back up
    let ens = reference_scenario(3);
    let targets = QosTargets::from_rates(&REFERENCE_RATES).unwrap();
    let res = solve(&ens, &targets, &SolverOptions::default()).unwrap();
    assert_eq!(res.trajectory.termination, Termination::Converged);
    let records = &res.trajectory.records;
    let min_sum: f64 = records
        .iter()
        .map(|r| r.mmse.iter().sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let final_sum: f64 = records.last().unwrap().mmse.iter().sum();
    assert!(
        min_sum < final_sum - 1e-3,
        "no overshoot: min {min_sum}, final {final_sum}"
    );
}

#[test]
fn trajectory_consistency() {
    let ens = reference_scenario(9);
    let targets = QosTargets::from_rates(&REFERENCE_RATES).unwrap();
    let res = solve(&ens, &targets, &SolverOptions::default()).unwrap();
    assert!(!res.trajectory.records.is_empty());
    for r in &res.trajectory.records {
        let total: f64 = r.xi.iter().sum();
        let db = 10.0 * total.log10();
        assert!((db - r.total_power_db).abs() <= 1e-12 * db.abs().max(1.0));
    }
}
