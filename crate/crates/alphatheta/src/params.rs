//! The parameter pair (α, θ), kept exact.
//!
//! Parameters are stored as arbitrary-precision rationals so that the exact
//! enumeration code can work with true equalities; float views are derived
//! on demand for the Monte Carlo samplers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("alpha must satisfy 0 <= alpha <= 1, got {0}")]
    AlphaOutOfRange(String),
    #[error("theta must satisfy theta >= 0, got {0}")]
    ThetaOutOfRange(String),
    #[error("cannot parse {0:?} as a rational number")]
    Unparseable(String),
}

/// The pair (α, θ) of Chinese-Restaurant / tree-growth parameters,
/// with 0 ≤ α ≤ 1 and θ ≥ 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params {
    alpha: Rational,
    theta: Rational,
}

impl Params {
    pub fn new(alpha: Rational, theta: Rational) -> Result<Self, ParamsError> {
        if alpha.is_negative() || alpha > Rational::one() {
            return Err(ParamsError::AlphaOutOfRange(alpha.to_string()));
        }
        if theta.is_negative() {
            return Err(ParamsError::ThetaOutOfRange(theta.to_string()));
        }
        Ok(Params { alpha, theta })
    }

    /// Construct from small integer fractions, e.g. `Params::from_ints(1, 2, 1, 2)`
    /// for (1/2, 1/2). Panics on invalid ranges; intended for fixed test grids.
    pub fn from_ints(a_num: i64, a_den: i64, t_num: i64, t_den: i64) -> Self {
        Params::new(
            Rational::new(BigInt::from(a_num), BigInt::from(a_den)),
            Rational::new(BigInt::from(t_num), BigInt::from(t_den)),
        )
        .expect("invalid parameter pair")
    }

    /// Parse from strings accepting either "p/q" or decimal notation.
    pub fn parse(alpha: &str, theta: &str) -> Result<Self, ParamsError> {
        Params::new(parse_rational(alpha)?, parse_rational(theta)?)
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn theta(&self) -> &Rational {
        &self.theta
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64().expect("alpha fits in f64")
    }

    pub fn theta_f64(&self) -> f64 {
        self.theta.to_f64().expect("theta fits in f64")
    }

    pub fn alpha_is_zero(&self) -> bool {
        self.alpha.is_zero()
    }

    pub fn alpha_is_one(&self) -> bool {
        self.alpha.is_one()
    }

    pub fn theta_is_zero(&self) -> bool {
        self.theta.is_zero()
    }

    /// Swap in a new θ keeping α, e.g. for (α, α)-selection on inner edges.
    pub fn with_theta(&self, theta: Rational) -> Result<Self, ParamsError> {
        Params::new(self.alpha.clone(), theta)
    }

    /// The (α, α) companion used for inner-branch strings of beads.
    pub fn alpha_alpha(&self) -> Self {
        Params {
            alpha: self.alpha.clone(),
            theta: self.alpha.clone(),
        }
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(alpha={}, theta={})", self.alpha, self.theta)
    }
}

/// Parse "p/q" or a decimal literal into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, ParamsError> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n =
            BigInt::from_str(num.trim()).map_err(|_| ParamsError::Unparseable(s.to_string()))?;
        let d =
            BigInt::from_str(den.trim()).map_err(|_| ParamsError::Unparseable(s.to_string()))?;
        if d.is_zero() {
            return Err(ParamsError::Unparseable(s.to_string()));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let int_part = if int_part.is_empty() { "0" } else { int_part };
        let neg = int_part.starts_with('-');
        let i = BigInt::from_str(int_part).map_err(|_| ParamsError::Unparseable(s.to_string()))?;
        if frac_part.is_empty() {
            return Ok(Rational::from_integer(i));
        }
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParamsError::Unparseable(s.to_string()));
        }
        let f = BigInt::from_str(frac_part).map_err(|_| ParamsError::Unparseable(s.to_string()))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac = Rational::new(f, scale);
        let whole = Rational::from_integer(i);
        return Ok(if neg { whole - frac } else { whole + frac });
    }
    BigInt::from_str(s)
        .map(Rational::from_integer)
        .map_err(|_| ParamsError::Unparseable(s.to_string()))
}

/// Rising factorial [x]_k = x (x+1) ⋯ (x+k−1) with [x]_0 = 1.
pub fn rising(x: &Rational, k: u64) -> Rational {
    let mut acc = Rational::one();
    let mut term = x.clone();
    for _ in 0..k {
        acc *= &term;
        term += Rational::one();
    }
    acc
}

/// Binomial coefficient as an exact rational.
pub fn binomial(n: u64, k: u64) -> Rational {
    if k > n {
        return Rational::zero();
    }
    let k = k.min(n - k);
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    Rational::new(num, den)
}

/// Format a rational as "num/den" for reports.
pub fn rational_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}
