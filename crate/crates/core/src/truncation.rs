//! Truncation calculus: `T_k`, `G_k`, `Theta_k` and a C^1 smooth truncation.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum TruncationError {
    #[error("invalid truncation level {0}")]
    InvalidLevel(f64),
}

/// A truncation level `k >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(k: f64) -> Result<Self, TruncationError> {
        if k >= 0.0 && !k.is_nan() {
            Ok(Self(k))
        } else {
            Err(TruncationError::InvalidLevel(k))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Clamp to `[-k, k]`.
    #[inline]
    pub fn t(self, s: f64) -> f64 {
        s.clamp(-self.0, self.0)
    }

    #[inline]
    pub fn g(self, s: f64) -> f64 {
        s - self.t(s)
    }

    /// Primitive of `T_k` vanishing at zero.
    #[inline]
    pub fn theta(self, s: f64) -> f64 {
        let k = self.0;
        let a = s.abs();
        if a <= k {
            0.5 * s * s
        } else {
            k * a - 0.5 * k * k
        }
    }
}

pub fn t_k(s: f64, k: f64) -> Result<f64, TruncationError> {
    Ok(TruncationLevel::new(k)?.t(s))
}

pub fn g_k(s: f64, k: f64) -> Result<f64, TruncationError> {
    Ok(TruncationLevel::new(k)?.g(s))
}

pub fn theta_k(s: f64, k: f64) -> Result<f64, TruncationError> {
    Ok(TruncationLevel::new(k)?.theta(s))
}

fn positive_level(k: f64) -> Result<f64, TruncationError> {
    if k > 0.0 && k.is_finite() {
        Ok(k)
    } else {
        Err(TruncationError::InvalidLevel(k))
    }
}

/// Smooth truncation: identity on `|s| <= k/2`, `sign(s) k` on `|s| >= k`,
/// cubic Hermite blend in between (slope 1 at `k/2`, slope 0 at `k`).
pub fn smooth_t_k(s: f64, k: f64) -> Result<f64, TruncationError> {
    let k = positive_level(k)?;
    let a = s.abs();
    let v = if a <= 0.5 * k {
        a
    } else if a >= k {
        k
    } else {
        let tau = (a - 0.5 * k) / (0.5 * k);
        0.5 * k * (1.0 + tau + tau * tau - tau * tau * tau)
    };
    Ok(v.copysign(s))
}

/// Derivative of [`smooth_t_k`]; lies in `[0, 4/3]` and vanishes for `|s| >= k`.
pub fn smooth_t_k_prime(s: f64, k: f64) -> Result<f64, TruncationError> {
    let k = positive_level(k)?;
    let a = s.abs();
    Ok(if a <= 0.5 * k {
        1.0
    } else if a >= k {
        0.0
    } else {
        let tau = (a - 0.5 * k) / (0.5 * k);
        (1.0 - tau) * (1.0 + 3.0 * tau)
    })
}
