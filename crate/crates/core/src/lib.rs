//! Transmission-coefficient timing for options on range-bound stocks.
//!
//! * [`tunneling`]: closed-form `λ`, `T` and `d`
//! * [`verification`]: quadrature and ODE cross-checks of the closed form
//! * [`market_data`]: CSV loaders and the evaluation journal
//! * [`range_detect`]: support/resistance detection
//! * [`strategy`]: vol-fall trigger, signals, backtest
//!
//! The barrier math is generic over [`Scalar`] (`f32` or `f64`); the
//! market-facing layers work in `f64`.

// `!(x > 0.0)` rejects NaN together with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod market_data;
pub mod plot;
pub mod range_detect;
pub mod scalar;
pub mod scenario;
pub mod strategy;
pub mod table1;
pub mod tunneling;
pub mod verification;

pub use scalar::Scalar;
pub use tunneling::{
    barrier_parameter, classify_regime, lambda, penetration_distance, transmission_coefficient, MarketParams,
    RangeBound, Regime, TunnelError, TunnelEvaluation,
};
pub use verification::{
    integrate_wavefunction, kappa, turning_point, wkb_exponent_numeric, BarrierSpec, LabError, WavefunctionProfile,
};

pub type MarketParams64 = MarketParams<f64>;
pub type MarketParams32 = MarketParams<f32>;
pub type RangeBound64 = RangeBound<f64>;
pub type RangeBound32 = RangeBound<f32>;
pub type TunnelEvaluation64 = TunnelEvaluation<f64>;
pub type TunnelEvaluation32 = TunnelEvaluation<f32>;
pub type BarrierSpec64 = BarrierSpec<f64>;
pub type BarrierSpec32 = BarrierSpec<f32>;
pub type WavefunctionProfile64 = WavefunctionProfile<f64>;
pub type WavefunctionProfile32 = WavefunctionProfile<f32>;
