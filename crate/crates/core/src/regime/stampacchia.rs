//! Level-set decay lemma: a nonincreasing `psi` with
//! `psi(h) <= M psi(k)^delta / (h - k)^gamma` for all `h > k >= 0`
//! vanishes at `d = (M psi(0)^(delta-1) 2^(delta gamma / (delta-1)))^(1/gamma)`.

use serde::Serialize;

use super::RegimeError;

/// Values at or below this count as zero.
pub const NUMERICAL_ZERO: f64 = 1e-12;
const RELATIVE_SLACK: f64 = 1e-12;

pub fn stampacchia_zero(
    m_const: f64,
    delta: f64,
    gamma_exp: f64,
    psi0: f64,
) -> Result<f64, RegimeError> {
    if !(delta > 1.0) {
        return Err(RegimeError::HypothesisViolation(format!(
            "delta must exceed 1, got {delta}"
        )));
    }
    if !(m_const > 0.0 && m_const.is_finite()) {
        return Err(RegimeError::HypothesisViolation(format!(
            "M must be positive, got {m_const}"
        )));
    }
    if !(gamma_exp > 0.0 && gamma_exp.is_finite()) {
        return Err(RegimeError::HypothesisViolation(format!(
            "gamma must be positive, got {gamma_exp}"
        )));
    }
    if !(psi0 >= 0.0 && psi0.is_finite()) {
        return Err(RegimeError::HypothesisViolation(format!(
            "psi(0) must be nonnegative, got {psi0}"
        )));
    }
    if psi0 == 0.0 {
        return Ok(0.0);
    }
    let d_gamma = m_const * psi0.powf(delta - 1.0) * 2f64.powf(delta * gamma_exp / (delta - 1.0));
    Ok(d_gamma.powf(1.0 / gamma_exp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StampacchiaReport {
    pub hypothesis_holds: bool,
    pub nonincreasing: bool,
    pub d: f64,
    pub psi_at_d: f64,
    pub zero_found: bool,
    /// First mesh pair `(k, h)` violating the hypothesis, if any.
    pub witness: Option<(f64, f64)>,
}

fn mesh(h_max: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| h_max * i as f64 / (n - 1) as f64).collect()
}

/// Smallest `M` making the hypothesis hold on the sample mesh; infinite if
/// `psi(k) = 0 < psi(h)` for some pair.
pub fn fit_constant(
    psi: &dyn Fn(f64) -> f64,
    delta: f64,
    gamma_exp: f64,
    h_max: f64,
    samples: usize,
) -> f64 {
    let xs = mesh(h_max, samples);
    let vals: Vec<f64> = xs.iter().map(|&x| psi(x)).collect();
    let mut m: f64 = 0.0;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            if vals[j] <= 0.0 {
                continue;
            }
            let den = vals[i].powf(delta);
            if den == 0.0 {
                return f64::INFINITY;
            }
            m = m.max(vals[j] * (xs[j] - xs[i]).powf(gamma_exp) / den);
        }
    }
    m
}

/// Scans every mesh pair `k < h` in `[0, h_max]`, then evaluates `psi` at the
/// predicted zero. Failures are reported, not raised.
pub fn stampacchia_verify(
    psi: &dyn Fn(f64) -> f64,
    m_const: f64,
    delta: f64,
    gamma_exp: f64,
    h_max: f64,
    samples: usize,
) -> Result<StampacchiaReport, RegimeError> {
    let xs = mesh(h_max, samples);
    let vals: Vec<f64> = xs.iter().map(|&x| psi(x)).collect();
    let nonincreasing = vals.iter().all(|&v| v >= 0.0) && vals.windows(2).all(|w| w[1] <= w[0]);
    let mut witness = None;
    'scan: for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let bound = m_const * vals[i].powf(delta) / (xs[j] - xs[i]).powf(gamma_exp);
            if vals[j] > bound * (1.0 + RELATIVE_SLACK) {
                witness = Some((xs[i], xs[j]));
                break 'scan;
            }
        }
    }
    let d = stampacchia_zero(m_const, delta, gamma_exp, psi(0.0))?;
    let psi_at_d = psi(d);
    Ok(StampacchiaReport {
        hypothesis_holds: nonincreasing && witness.is_none(),
        nonincreasing,
        d,
        psi_at_d,
        zero_found: psi_at_d <= NUMERICAL_ZERO,
        witness,
    })
}
