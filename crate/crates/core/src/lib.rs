//! Exact finite-sample and asymptotic prediction risks of James–Stein-type
//! shrinkage estimators in Gaussian linear regression, evaluated conditional
//! on the design matrix.
//!
//! The estimator family is `β̂(c) = [1 − c·p / (β̂_ML′X′Xβ̂_ML)] β̂_ML` with
//! tuning parameter `c ≥ 0`; `c = (p − 2)/p` is the classical James–Stein
//! choice and `c = 0` recovers maximum likelihood. Risks are reported as
//! in-sample (`ρ₁`, weighted by `X′X/n`) and out-of-sample (`ρ₂`, weighted by
//! the covariance `Σ` of a fresh regressor). The noise variance is fixed at 1.
//!
//! Modules:
//! - [`linmodel`]: model instances, design and response sampling.
//! - [`chisq_moments`]: inverse moments of the noncentral chi-square law.
//! - [`risk_exact`]: closed-form conditional risks.
//! - [`asymptotics`]: limit risks, worst-case supremum, phase classification.
//! - [`rmt`]: Marchenko–Pastur law and spectral diagnostics.
//! - [`oracle`]: independent Monte Carlo estimators of every closed form.
//! - [`cli`]: experiment commands used by the `shrinkrisk` binary.

// `!(x >= 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod chisq_moments;
pub mod cli;
pub mod error;
pub mod linmodel;
pub mod optim;
pub mod oracle;
pub mod quadrature;
pub mod risk_exact;
pub mod rmt;
mod rng;
pub mod stats;

pub use error::{Error, Result};
