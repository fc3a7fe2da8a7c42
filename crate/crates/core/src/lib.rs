//! Stochastic two-speed-state traffic model.
//!
//! Vehicles on a ring road occupy one of two speed states. After using
//! conservation of the vehicle count the dynamics reduce to a single
//! occupation number `n1` (vehicles in the slow state), which follows an
//! Itô SDE with logistic drift and multiplicative noise. This crate provides
//!
//! - [`model`]: parameters and the deterministic reduced model,
//! - [`analysis`]: closed-form thresholds, crossing level and stationary moments,
//! - [`sde`]: reproducible Euler–Maruyama / Milstein path ensembles,
//! - [`experiments`]: convergence, confidence-interval, moment-ratio,
//!   crossing and fundamental-diagram studies,
//! - [`io`]: configuration, CSV/JSON output and SVG charts.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
pub use model::{InitPolicy, ModelParams, Scenario};
