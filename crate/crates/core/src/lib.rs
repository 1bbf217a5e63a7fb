//! Monte Carlo pricing of n-th to default basket default swaps under a
//! Gaussian copula, with correlation Greeks computed by adjoint algorithmic
//! differentiation of the pathwise estimator.
//!
//! Module map:
//!
//! * [`corelin`]: correlation matrices, Cholesky factorization, and its
//!   tangent and adjoint;
//! * [`stochastics`]: per-path random streams, the normal distribution and
//!   exponential default-time marginals;
//! * [`copula`]: the per-path forward sweep with its tape, the adjoint sweep
//!   and the tangent sweep;
//! * [`payout`]: sharp and smoothed n-th to default payouts;
//! * [`greeks`]: pricing and the bump, forward and adjoint Greeks engines;
//! * [`stats`]: streaming means and standard errors.

// Negated comparisons are deliberate: NaN inputs must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copula;
pub mod corelin;
pub mod error;
pub mod greeks;
pub mod payout;
pub mod stats;
pub mod stochastics;

pub use corelin::{
    CholeskyFactor, CorrelationGradient, CorrelationMatrix, LowerTriangularSeed, Pair,
};
pub use error::{Error, Result};
pub use greeks::{BinAccumulator, Engine, EngineConfig, GreeksEstimate, Method, PriceEstimate};
pub use payout::{BasketDefaultSwap, PayoutResult};
pub use stochastics::{ExponentialMarginal, RngStream};
