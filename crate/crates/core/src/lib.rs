//! Desk-scale toolkit for weighting formulaic alphas with reinforcement
//! learning and backtesting the result on daily bars.
//!
//! The pipeline: load daily OHLCV plus any extra feature columns
//! ([`frame`]), derive the standard indicator set ([`indicators`]), evaluate
//! a file of alpha formulas into a standardized matrix ([`dsl`], [`matrix`]),
//! score and select alphas ([`metrics`], [`boost`], [`selection`]), then
//! train a PPO policy that emits per-alpha weights inside a risk-managed
//! trading environment ([`env`], [`ppo`]). [`pipeline`] wires the stages
//! together with a strict train/test separation.
//!
//! Heavy loops (matrix evaluation, correlation matrices, boosting split
//! search, multi-seed evaluation) run on rayon when the default `parallel`
//! feature is enabled and fall back to plain iterators without it. Both
//! modes produce bit-identical results: parallel sites are order-preserving
//! maps over independent items, and every reduction is sequential.

pub mod boost;
pub mod dsl;
pub mod env;
pub mod error;
pub mod frame;
pub mod indicators;
pub mod matrix;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod ppo;
mod rolling;
pub mod selection;
pub mod synthetic;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use frame::{FeatureFrame, TRADING_DAYS_PER_YEAR};
