//! Closed-form transmission coefficient for a range-bound market.
//!
//! With `λ = r/σ` and range width `K`, the barrier parameter is
//! `u = sqrt(1 - λK²)` and the transmission coefficient is
//!
//! ```text
//! T = exp(-2·sqrt(r(σ²+r)/σ⁴)·[½·ln((1+u)/(1-u)) - u])
//! ```
//!
//! The penetration distance past the broken level is `d = sqrt(σ/r) - K`.
//!
//! `K` is taken in the same price units as the quotes it was measured
//! from while `r` and `σ` are annualized decimal fractions. The mix is not
//! dimensionally consistent, and the published worked values depend on it
//! being evaluated literally, so no rescaling happens here.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TunnelError {
    #[error("risk-free rate must be finite and > 0, got {0}")]
    InvalidRate(f64),
    #[error("volatility must be finite and > 0, got {0}")]
    InvalidVolatility(f64),
    #[error("range width must be finite and > 0, got {0}")]
    InvalidWidth(f64),
    #[error("resistance {resistance} must be above support {support}")]
    InvertedRange { support: f64, resistance: f64 },
    #[error("not in tunneling regime: K >= sqrt(sigma/r) ((r/sigma)*K^2 = {ratio})")]
    NoBarrier { ratio: f64 },
}

fn as_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Risk-free rate and implied volatility at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams<T = f64> {
    r: T,
    sigma: T,
}

impl<T: Scalar> MarketParams<T> {
    pub fn new(r: T, sigma: T) -> Result<Self, TunnelError> {
        if !(r.is_finite() && r > T::zero()) {
            return Err(TunnelError::InvalidRate(as_f64(r)));
        }
        if !(sigma.is_finite() && sigma > T::zero()) {
            return Err(TunnelError::InvalidVolatility(as_f64(sigma)));
        }
        Ok(Self { r, sigma })
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// Same rate, new implied volatility.
    pub fn with_sigma(&self, sigma: T) -> Result<Self, TunnelError> {
        Self::new(self.r, sigma)
    }
}

/// Support and resistance bounding a range. The width is always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeBound<T = f64> {
    support: T,
    resistance: T,
}

impl<T: Scalar> RangeBound<T> {
    pub fn new(support: T, resistance: T) -> Result<Self, TunnelError> {
        if !(support.is_finite() && resistance.is_finite() && resistance > support) {
            return Err(TunnelError::InvertedRange {
                support: as_f64(support),
                resistance: as_f64(resistance),
            });
        }
        Ok(Self {
            support,
            resistance,
        })
    }

    pub fn support(&self) -> T {
        self.support
    }

    pub fn resistance(&self) -> T {
        self.resistance
    }

    /// `K = resistance - support`.
    pub fn width(&self) -> T {
        self.resistance - self.support
    }

    pub fn midpoint(&self) -> T {
        (self.support + self.resistance) / T::lit(2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `(r/σ)K² < 1`: a real barrier of positive thickness.
    Tunneling,
    /// `(r/σ)K² = 1` within the scalar's turning tolerance.
    AtTurningPoint,
    /// `(r/σ)K² > 1`: the range already spans the turning point.
    NoBarrier,
}

/// Everything computed for one `(r, σ, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TunnelEvaluation<T = f64> {
    pub lambda: T,
    pub u: T,
    /// Argument of the exponential before negation.
    pub exponent: T,
    #[serde(rename = "t")]
    pub transmission: T,
    #[serde(rename = "d")]
    pub penetration: T,
    pub regime: Regime,
}

fn check_width<T: Scalar>(k: T) -> Result<(), TunnelError> {
    if k.is_finite() && k > T::zero() {
        Ok(())
    } else {
        Err(TunnelError::InvalidWidth(as_f64(k)))
    }
}

/// `λ = r/σ`.
pub fn lambda<T: Scalar>(params: &MarketParams<T>) -> T {
    params.r / params.sigma
}

/// `(r/σ)K²`, the quantity the regime is decided on.
pub fn barrier_ratio<T: Scalar>(params: &MarketParams<T>, k: T) -> T {
    lambda(params) * k * k
}

/// Expects `k > 0`. A NaN width lands in `NoBarrier`.
pub fn classify_regime<T: Scalar>(params: &MarketParams<T>, k: T) -> Regime {
    let ratio = barrier_ratio(params, k);
    let tol = T::turning_tolerance();
    if (ratio - T::one()).abs() <= tol {
        Regime::AtTurningPoint
    } else if ratio < T::one() {
        Regime::Tunneling
    } else {
        Regime::NoBarrier
    }
}

/// `u = sqrt(1 - (r/σ)K²)`, exactly zero at the turning point.
pub fn barrier_parameter<T: Scalar>(params: &MarketParams<T>, k: T) -> Result<T, TunnelError> {
    check_width(k)?;
    match classify_regime(params, k) {
        Regime::Tunneling => Ok((T::one() - barrier_ratio(params, k)).sqrt()),
        Regime::AtTurningPoint => Ok(T::zero()),
        Regime::NoBarrier => Err(TunnelError::NoBarrier {
            ratio: as_f64(barrier_ratio(params, k)),
        }),
    }
}

/// `artanh(u) - u`, the bracketed term of the exponent. Non-negative on `[0, 1)`.
///
/// Switches to `u³/3 + u⁵/5` for small `u` where the direct difference
/// would cancel.
pub fn artanh_minus_identity<T: Scalar>(u: T) -> T {
    if u < T::series_crossover() {
        let u2 = u * u;
        u * u2 * (T::one() / T::lit(3.0) + u2 / T::lit(5.0))
    } else {
        // artanh(u) = ½·ln((1+u)/(1-u)) = ½·ln1p(2u/(1-u))
        T::lit(0.5) * (T::lit(2.0) * u / (T::one() - u)).ln_1p() - u
    }
}

/// `2·sqrt(r(σ²+r)/σ⁴)`, the prefactor of the bracket in the exponent.
pub fn exponent_prefactor<T: Scalar>(params: &MarketParams<T>) -> T {
    let (r, sigma) = (params.r, params.sigma);
    T::lit(2.0) * (r * (sigma * sigma + r)).sqrt() / (sigma * sigma)
}

/// `sqrt(σ/r)`: the price level at which the barrier closes.
fn turning_level<T: Scalar>(params: &MarketParams<T>) -> T {
    (params.sigma / params.r).sqrt()
}

/// `d = sqrt(σ/r) - K`. Zero at the turning point, an error past it.
pub fn penetration_distance<T: Scalar>(params: &MarketParams<T>, k: T) -> Result<T, TunnelError> {
    check_width(k)?;
    match classify_regime(params, k) {
        Regime::Tunneling => Ok(turning_level(params) - k),
        Regime::AtTurningPoint => Ok(T::zero()),
        Regime::NoBarrier => Err(TunnelError::NoBarrier {
            ratio: as_f64(barrier_ratio(params, k)),
        }),
    }
}

/// Full evaluation of `T`, `d` and the intermediate terms.
pub fn transmission_coefficient<T: Scalar>(
    params: &MarketParams<T>,
    k: T,
) -> Result<TunnelEvaluation<T>, TunnelError> {
    let u = barrier_parameter(params, k)?;
    let regime = classify_regime(params, k);
    let exponent = if regime == Regime::AtTurningPoint {
        T::zero()
    } else {
        exponent_prefactor(params) * artanh_minus_identity(u)
    };
    Ok(TunnelEvaluation {
        lambda: lambda(params),
        u,
        exponent,
        transmission: (-exponent).exp(),
        penetration: penetration_distance(params, k)?,
        regime,
    })
}

/// Convenience for a detected range.
pub fn evaluate_range<T: Scalar>(
    params: &MarketParams<T>,
    range: &RangeBound<T>,
) -> Result<TunnelEvaluation<T>, TunnelError> {
    transmission_coefficient(params, range.width())
}
