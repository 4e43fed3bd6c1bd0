//! Introspective distillation on synthetic bias benchmarks.
//!
//! A causal two-branch teacher produces a factual in-distribution readout and
//! a counterfactual out-of-distribution readout from one set of weights.
//! Per-sample introspection compares how well each readout fits the ground
//! truth, blends the two knowledge sources with inverse-fit weights, and
//! distills the blend into a plain student network. Dataset generators with
//! controllable answer-prior and position bias make the ID/OOD trade-offs
//! reproducible on a CPU in minutes.
//!
//! Modules mirror the pipeline: [`num`] (deterministic numerics), [`data`]
//! (bias generators and dataset files), [`teacher`] (the causal model),
//! [`introspect`] (scoring, weighting, blending, distillation loss),
//! [`eval`] (metrics, student training, weight histograms), and [`exp`]
//! (config-driven experiment orchestration).

pub mod data;
pub mod error;
pub mod eval;
pub mod exp;
pub mod introspect;
pub mod num;
pub mod teacher;

pub use error::{Error, Result};

/// Tool version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
