//! Exponent calculus and regime classification for data `f in L^m`.
//!
//! All exponent arithmetic is exact over `Rational64`, so threshold
//! comparisons are decided without rounding.

pub mod stampacchia;

use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::Serialize;
use std::fmt;
use thiserror::Error;

pub use stampacchia::{fit_constant, stampacchia_verify, stampacchia_zero, StampacchiaReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegimeError {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(i64),
    #[error("summability exponent must be >= 1, got {0}")]
    ExponentBelowOne(Rational64),
    #[error("{op}({p}) is undefined for N = {n}")]
    Undefined {
        op: &'static str,
        p: Rational64,
        n: i64,
    },
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
}

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

fn check_dim(n: i64) -> Result<(), RegimeError> {
    if n < 2 {
        Err(RegimeError::InvalidDimension(n))
    } else {
        Ok(())
    }
}

fn check_p(p: Rational64) -> Result<(), RegimeError> {
    if p < Rational64::one() {
        Err(RegimeError::ExponentBelowOne(p))
    } else {
        Ok(())
    }
}

/// `p* = (N+2)p / (N+2-p)` for `1 <= p < N+2`.
pub fn star(p: Rational64, n: i64) -> Result<Rational64, RegimeError> {
    check_dim(n)?;
    check_p(p)?;
    let q = r(n + 2);
    if p >= q {
        return Err(RegimeError::Undefined { op: "star", p, n });
    }
    Ok(q * p / (q - p))
}

/// `p** = (N+2)p / (N+2-2p)` for `1 <= p < (N+2)/2`.
pub fn dstar(p: Rational64, n: i64) -> Result<Rational64, RegimeError> {
    check_dim(n)?;
    check_p(p)?;
    let q = r(n + 2);
    if r(2) * p >= q {
        return Err(RegimeError::Undefined { op: "dstar", p, n });
    }
    Ok(q * p / (q - r(2) * p))
}

/// `gamma = Nm / (2(N+2-2m))` for `1 < m < (N+2)/2`.
pub fn gamma(m: Rational64, n: i64) -> Result<Rational64, RegimeError> {
    check_dim(n)?;
    check_p(m)?;
    if m == Rational64::one() || r(2) * m >= r(n + 2) {
        return Err(RegimeError::Undefined {
            op: "gamma",
            p: m,
            n,
        });
    }
    Ok(r(n) * m / (r(2) * (r(n + 2) - r(2) * m)))
}

/// Holder conjugate `m' = m / (m-1)` for `m > 1`.
pub fn conjugate(m: Rational64) -> Option<Rational64> {
    (m > Rational64::one()).then(|| m / (m - Rational64::one()))
}

/// `Nm / (N+2-2m)`, the spatial exponent of the `L^inf(L^q)` bound.
pub fn sup_space_exponent(m: Rational64, n: i64) -> Option<Rational64> {
    let den = r(n + 2) - r(2) * m;
    (den > Rational64::zero()).then(|| r(n) * m / den)
}

/// `(N+2)/2`.
pub fn bounded_threshold(n: i64) -> Rational64 {
    Rational64::new(n + 2, 2)
}

/// `(2N+4)/(N+4)`.
pub fn energy_threshold(n: i64) -> Rational64 {
    Rational64::new(2 * n + 4, n + 4)
}

/// `(2N+4)/(N+6)`.
pub fn distributional_threshold(n: i64) -> Rational64 {
    Rational64::new(2 * n + 4, n + 6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Bounded,
    FiniteEnergy,
    Distributional,
    Entropy,
    OutsideTheory,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Bounded => "bounded",
            Regime::FiniteEnergy => "finite_energy",
            Regime::Distributional => "distributional",
            Regime::Entropy => "entropy",
            Regime::OutsideTheory => "outside_theory",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An exponent in a predicted space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentBound {
    Exact(Rational64),
    Infinity,
    /// Every exponent strictly below the value.
    Below(Rational64),
    /// Every finite exponent.
    AnyFinite,
}

impl fmt::Display for ExponentBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExponentBound::Exact(q) => write!(f, "{q}"),
            ExponentBound::Infinity => f.write_str("inf"),
            ExponentBound::Below(q) => write!(f, "<{q}"),
            ExponentBound::AnyFinite => f.write_str("<inf"),
        }
    }
}

impl Serialize for ExponentBound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `L^r(0,T; L^q)` or `L^r(0,T; W^{1,q}_0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpaceDescriptor {
    pub r: ExponentBound,
    pub q: ExponentBound,
    pub with_gradient: bool,
}

impl SpaceDescriptor {
    fn new(r: ExponentBound, q: ExponentBound, with_gradient: bool) -> Self {
        Self {
            r,
            q,
            with_gradient,
        }
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = if self.with_gradient { "W^{1," } else { "L^{" };
        write!(f, "L^{{{}}}(0,T; {inner}{}}})", self.r, self.q)
    }
}

fn ser_rational<S: serde::Serializer>(v: &Rational64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn ser_opt_rational<S: serde::Serializer>(v: &Option<Rational64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_some(&v.to_string()),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(serialize_with = "ser_rational")]
    pub m: Rational64,
    pub regime: Regime,
    #[serde(serialize_with = "ser_opt_rational")]
    pub m_star: Option<Rational64>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub m_dstar: Option<Rational64>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub gamma: Option<Rational64>,
    pub predicted_spaces: Vec<SpaceDescriptor>,
}

impl RegimeReport {
    /// Two-column text table.
    pub fn table(&self) -> String {
        let opt =
            |v: Option<Rational64>| v.map_or_else(|| "undefined".to_string(), |v| v.to_string());
        let mut rows = vec![
            ("N".to_string(), self.n.to_string()),
            ("m".to_string(), self.m.to_string()),
            ("regime".to_string(), self.regime.to_string()),
            ("m*".to_string(), opt(self.m_star)),
            ("m**".to_string(), opt(self.m_dstar)),
            ("gamma".to_string(), opt(self.gamma)),
        ];
        for (i, s) in self.predicted_spaces.iter().enumerate() {
            rows.push((format!("space[{i}]"), s.to_string()));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }
}

fn regime_of(m: Rational64, n: i64) -> Regime {
    if n == 2 {
        Regime::OutsideTheory
    } else if m > bounded_threshold(n) {
        Regime::Bounded
    } else if m >= energy_threshold(n) {
        // m = (N+2)/2 falls between the bounded and finite-energy ranges;
        // it belongs to every L^p with p < m and is classified downward
        Regime::FiniteEnergy
    } else if m >= distributional_threshold(n) {
        Regime::Distributional
    } else {
        Regime::Entropy
    }
}

pub fn classify(m: Rational64, n: i64) -> Result<RegimeReport, RegimeError> {
    check_dim(n)?;
    check_p(m)?;
    use ExponentBound::*;
    let regime = regime_of(m, n);
    let m_star = star(m, n).ok();
    let m_dstar = dstar(m, n).ok();
    let gam = gamma(m, n).ok();
    let sup_q = sup_space_exponent(m, n).map_or(AnyFinite, Exact);
    let dstar_bound = m_dstar.map_or(AnyFinite, Exact);
    let d = SpaceDescriptor::new;
    let energy = d(Exact(r(2)), Exact(r(2)), true);
    let predicted_spaces = match regime {
        Regime::Bounded => vec![
            d(Infinity, Exact(r(2)), false),
            energy,
            d(Infinity, Infinity, false),
        ],
        Regime::FiniteEnergy => vec![
            d(Infinity, sup_q, false),
            energy,
            d(dstar_bound, dstar_bound, false),
        ],
        Regime::Distributional => {
            let s = m_star.expect("defined below (N+2)/2");
            vec![
                d(Infinity, sup_q, false),
                d(Exact(s), Exact(s), true),
                d(dstar_bound, dstar_bound, false),
            ]
        }
        Regime::Entropy => {
            let s = m_star.expect("defined below (N+2)/2");
            let ds = m_dstar.expect("defined below (N+2)/2");
            let l1 = d(Infinity, Exact(r(1)), false);
            if m == Rational64::one() {
                vec![
                    l1,
                    d(Below(ds), Below(ds), false),
                    d(Below(s), Below(s), true),
                ]
            } else {
                vec![
                    l1,
                    d(Exact(ds), Exact(ds), false),
                    d(Exact(s), Exact(s), true),
                ]
            }
        }
        Regime::OutsideTheory => Vec::new(),
    };
    Ok(RegimeReport {
        n,
        m,
        regime,
        m_star,
        m_dstar,
        gamma: gam,
        predicted_spaces,
    })
}
