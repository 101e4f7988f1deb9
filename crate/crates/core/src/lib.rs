//! Privacy-utility tradeoffs for jointly Gaussian features released under
//! additive independent Gaussian noise.
//!
//! A [`CovarianceModel`] describes disclosed features `X` together with
//! private features `Xp` and utility features `Xu`. The release is
//! `Y = X + N` with `N ~ N(0, diag(θ))`. Leakage is `I(Xp;Y)`; utility is
//! `I(Xu;Y)` or, for a single utility feature, the Fisher information of `Y`
//! about `Xu`. [`greedy::greedy_optimize`] picks `θ` to cut leakage under a
//! utility-loss budget and a minimum gain-to-loss ratio;
//! [`baselines`] holds penalty-method gradient descent and simulated
//! annealing for comparison, and [`harness`] runs parameter sweeps.
//!
//! The numerical core is generic over [`Real`] (`f32`/`f64`); the aliases
//! below fix it to `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod covmodel;
pub mod datasets;
pub mod error;
pub mod fisher;
pub mod gauss_info;
pub mod greedy;
pub mod harness;
pub mod linalg;
pub mod scalar;
pub mod trace;

pub use covmodel::{CovarianceModel, NoiseAllocation, ValidationReport};
pub use error::{Error, Result};
pub use gauss_info::InfoPoint;
pub use greedy::{TradeoffConfig, TradeoffResult, UtilityMetric};
pub use linalg::Matrix;
pub use scalar::Real;

pub type Model = CovarianceModel<f64>;
pub type Noise = NoiseAllocation<f64>;
pub type Config = TradeoffConfig<f64>;
pub type Outcome = TradeoffResult<f64>;
pub type Point = InfoPoint<f64>;
pub type Mat = Matrix<f64>;

pub type ModelF32 = CovarianceModel<f32>;
pub type NoiseF32 = NoiseAllocation<f32>;
