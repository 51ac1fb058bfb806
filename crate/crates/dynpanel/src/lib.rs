//! Conditional maximum score estimation for dynamic panel binary choice
//! models with entity fixed effects.
//!
//! The estimator targets the latent-utility model
//!
//! ```text
//! y_it = 1{ alpha_i + r * y_i,t-1 + x_it' b + w * z_it >= eps_it }
//! ```
//!
//! where `alpha_i` is an unobserved individual effect, `y_i,t-1` the lagged
//! choice, `x_it` ordinary covariates, and `z_it` a continuous
//! special regressor with unbounded support. Coefficients are identified up
//! to scale only, so everything lives on the unit sphere with the special
//! regressor coefficient bounded away from zero.
//!
//! The crate provides:
//!
//! - [`panel`]: data model for balanced/unbalanced binary-choice panels,
//!   CSV ingestion, and extraction of the four-period estimation windows
//!   the objective consumes;
//! - [`dgp`]: simulation designs for the Monte Carlo studies;
//! - [`objective`]: the trimmed maximum score sample objectives and the
//!   trimming-threshold schedule;
//! - [`optimizer`]: differential evolution over the unit sphere, plus a
//!   dense grid oracle used by tests;
//! - [`inference`]: m-out-of-n bootstrap confidence intervals with a
//!   double-bootstrap convergence-rate estimate;
//! - [`mc`]: the Monte Carlo replication harness and a population-objective
//!   identification check;
//! - [`pipeline`]: the window -> trim -> optimize chain shared by the CLI,
//!   the harness, and the bootstrap.
//!
//! All randomness flows from explicit `u64` seeds; results are bitwise
//! reproducible and independent of the number of worker threads. The
//! `parallel` feature (on by default) runs the data-parallel inner loops on
//! rayon; without it the crate falls back to sequential execution with
//! identical output.

pub mod dgp;
pub mod error;
pub mod exec;
pub mod inference;
pub mod mc;
pub mod objective;
pub mod optimizer;
pub mod panel;
pub mod pipeline;
pub(crate) mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use panel::{Coefficients, EstimationWindow, IndividualRecord, PanelDataset, WindowSet};
