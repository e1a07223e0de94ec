//! Digamma and decibel helpers.

use super::NumericsError;

/// Digamma function for `x > 0`, via the upward recurrence into the
/// asymptotic regime and a Bernoulli-number tail. Absolute accuracy is
/// better than 1e-10 over the positive reals.
pub fn digamma(x: f64) -> Result<f64, NumericsError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(NumericsError::DomainError(format!(
            "digamma requires x > 0, got {x}"
        )));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 8.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum B_{2n}/(2n x^{2n})
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    Ok(acc + x.ln() - 0.5 * inv - tail)
}

/// `10 log10(p)`; fails for non-positive input.
pub fn to_db(p: f64) -> Result<f64, NumericsError> {
    if !(p > 0.0) {
        return Err(NumericsError::DomainError(format!(
            "to_db requires p > 0, got {p}"
        )));
    }
    Ok(10.0 * p.log10())
}

/// Inverse of [`to_db`].
pub fn from_db(d: f64) -> f64 {
    10f64.powf(d / 10.0)
}
