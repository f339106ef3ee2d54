//! Additive hazards regression for right-censored data and explained
//! variation measures built on its conditional survival curves.
//!
//! The model is `λ(t|Z) = λ₀(t) + βᵀZ`. [`linying::AdditiveFit`] estimates
//! `β` in closed form together with a piecewise-linear cumulative baseline,
//! [`explained_variation::r2_tau`] turns the fitted curves into `R²_τ`, and
//! [`simulation`] regenerates the Monte Carlo studies used to calibrate it.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod condsurv;
pub mod cox;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod explained_variation;
mod linalg;
pub mod linying;
pub mod quadrature;
pub mod simulation;
pub mod zgivent;

pub use condsurv::{ConditionalModel, SurvivalCurve};
pub use cox::{fit_cox, CoxFit};
pub use dataset::{freireich, load_csv, SurvivalDataset};
pub use error::{Error, Result};
pub use explained_variation::{r2_tau, ExplainedVariationReport, R2Options};
pub use linying::AdditiveFit;
pub use zgivent::BaselineHazard;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
