//! MSE-preserving conversion between broadcast-channel and dual-MAC filter
//! sets. Equating the per-user Monte Carlo average MSEs on both sides yields
//! a K x K real linear system in the squared scaling factors; its matrix has
//! positive diagonal, non-positive off-diagonal entries, and positive column
//! sums, so the solution is positive exactly when no filter is degenerate.
//! Summing the equations telescopes the cross terms, which preserves the
//! total transmit power; the conversion asserts that identity.

use num_complex::Complex64;
use thiserror::Error;

use crate::bc_model::BcFilterSet;
use crate::channel::ChannelEnsemble;
use crate::mac_model::MacFilterSet;
use crate::numerics::{hdot, norm_sq};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualityError {
    #[error("degenerate filter for user {user}: scaling system is singular or non-positive")]
    DegenerateFilter { user: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Per-user positive scaling factors linking the two domains:
/// `p_k = alpha_k g_k` and `t_k = alpha_k sigma_k f_k`.
#[derive(Debug, Clone)]
pub struct DualityScaling {
    pub alphas: Vec<f64>,
}

/// Gaussian elimination with partial pivoting for the small real scaling
/// systems.
fn solve_real(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row][j] -= factor * a[col][j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in (row + 1)..n {
            acc -= a[row][j] * x[j];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn alphas_from_squares(squares: Vec<f64>) -> Result<Vec<f64>, DualityError> {
    let max = squares.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(DualityError::DegenerateFilter { user: 0 });
    }
    for (k, &x) in squares.iter().enumerate() {
        if !(x > 1e-14 * max) || !x.is_finite() {
            return Err(DualityError::DegenerateFilter { user: k });
        }
    }
    Ok(squares.into_iter().map(f64::sqrt).collect())
}

fn assert_power_preserved(before: f64, after: f64) {
    let tol = 1e-9 * (1.0 + before.abs());
    assert!(
        (before - after).abs() <= tol,
        "total power not preserved by duality conversion: {before} vs {after}"
    );
}

/// Converts BC filters to dual-MAC filters with identical per-user average
/// MSEs and identical total power: `g_k = p_k / alpha_k`,
/// `t_k^(m) = alpha_k sigma_k f_k^(m)`.
pub fn bc_to_mac(
    bc: &BcFilterSet,
    ensemble: &ChannelEnsemble,
) -> Result<(MacFilterSet, DualityScaling), DualityError> {
    let k_users = ensemble.num_users();
    let m_count = ensemble.num_samples();
    if bc.precoders.len() != k_users || bc.receivers.len() != k_users {
        return Err(DualityError::DimensionMismatch(format!(
            "{} precoders / {} receiver rows for {} users",
            bc.precoders.len(),
            bc.receivers.len(),
            k_users
        )));
    }
    // cross[k][i] = (1/M) sum_m |f_k^(m)|^2 |h_k^(m)H p_i|^2
    let cross: Vec<Vec<f64>> = (0..k_users)
        .map(|k| {
            let row = par::chunk_partials(
                m_count,
                || vec![0.0; k_users],
                |acc, m| {
                    let w = bc.receivers[k][m].norm_sqr();
                    if w == 0.0 {
                        return;
                    }
                    let h = ensemble.sample(k, m);
                    for (i, p) in bc.precoders.iter().enumerate() {
                        acc[i] += w * hdot(h, p).norm_sqr();
                    }
                },
            );
            let mut total = vec![0.0; k_users];
            for part in row {
                for (t, v) in total.iter_mut().zip(part) {
                    *t += v;
                }
            }
            for t in total.iter_mut() {
                *t /= m_count as f64;
            }
            total
        })
        .collect();
    let f_power: Vec<f64> = (0..k_users)
        .map(|k| norm_sq(&bc.receivers[k]) / m_count as f64)
        .collect();

    let mut system = vec![vec![0.0; k_users]; k_users];
    let mut rhs = vec![0.0; k_users];
    for k in 0..k_users {
        let mut diag = ensemble.noise_var(k) * f_power[k];
        for i in 0..k_users {
            if i != k {
                diag += cross[k][i];
                system[k][i] = -cross[i][k];
            }
        }
        system[k][k] = diag;
        rhs[k] = norm_sq(&bc.precoders[k]);
    }
    let squares =
        solve_real(system, rhs).ok_or(DualityError::DegenerateFilter { user: 0 })?;
    let alphas = alphas_from_squares(squares)?;

    let receivers: Vec<Vec<Complex64>> = bc
        .precoders
        .iter()
        .zip(&alphas)
        .map(|(p, &a)| p.iter().map(|x| x / a).collect())
        .collect();
    let precoder_samples: Vec<Vec<Complex64>> = (0..k_users)
        .map(|k| {
            let scale = alphas[k] * ensemble.noise_var(k).sqrt();
            bc.receivers[k].iter().map(|f| f * scale).collect()
        })
        .collect();
    let mac = MacFilterSet::from_parts(receivers, precoder_samples);
    assert_power_preserved(bc.total_power(), mac.total_power());
    Ok((mac, DualityScaling { alphas }))
}

/// Converts dual-MAC filters back to BC filters: `p_k = alpha_k g_k`,
/// `f_k^(m) = t_k^(m) / (alpha_k sigma_k)`.
pub fn mac_to_bc(
    mac: &MacFilterSet,
    ensemble: &ChannelEnsemble,
) -> Result<(BcFilterSet, DualityScaling), DualityError> {
    let k_users = ensemble.num_users();
    let m_count = ensemble.num_samples();
    if mac.receivers.len() != k_users || mac.precoder_samples.len() != k_users {
        return Err(DualityError::DimensionMismatch(format!(
            "{} receivers / {} precoder rows for {} users",
            mac.receivers.len(),
            mac.precoder_samples.len(),
            k_users
        )));
    }
    // cross[k][i] = (1/M) sum_m |t_i^(m)|^2 |g_k^H h_i^(m)|^2 / sigma_i^2
    let cross: Vec<Vec<f64>> = (0..k_users)
        .map(|k| {
            (0..k_users)
                .map(|i| {
                    par::sum_f64(m_count, |m| {
                        mac.precoder_samples[i][m].norm_sqr()
                            * hdot(&mac.receivers[k], ensemble.dual_sample(i, m)).norm_sqr()
                    }) / m_count as f64
                })
                .collect()
        })
        .collect();

    let mut system = vec![vec![0.0; k_users]; k_users];
    let mut rhs = vec![0.0; k_users];
    for k in 0..k_users {
        let mut diag = norm_sq(&mac.receivers[k]);
        for i in 0..k_users {
            if i != k {
                diag += cross[k][i];
                system[k][i] = -cross[i][k];
            }
        }
        system[k][k] = diag;
        rhs[k] = mac.powers[k];
    }
    let squares =
        solve_real(system, rhs).ok_or(DualityError::DegenerateFilter { user: 0 })?;
    let alphas = alphas_from_squares(squares)?;

    let precoders: Vec<Vec<Complex64>> = mac
        .receivers
        .iter()
        .zip(&alphas)
        .map(|(g, &a)| g.iter().map(|x| x * a).collect())
        .collect();
    let receivers: Vec<Vec<Complex64>> = (0..k_users)
        .map(|k| {
            let scale = 1.0 / (alphas[k] * ensemble.noise_var(k).sqrt());
            mac.precoder_samples[k].iter().map(|t| t * scale).collect()
        })
        .collect();
    let bc = BcFilterSet {
        precoders,
        receivers,
    };
    assert_power_preserved(mac.total_power(), bc.total_power());
    Ok((bc, DualityScaling { alphas }))
}
