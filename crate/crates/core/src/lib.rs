//! Robust personalized pricing under purchase-probability uncertainty.
//!
//! The crate trains a demand model, estimates prediction uncertainty by
//! bootstrap, and assigns one price per consumer so that expected revenue
//! is maximized against an adversary who may degrade up to `Γ` purchase
//! probabilities.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod dataset;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod ingestion;
pub mod lagrangian;
pub mod model;
pub mod predictor;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
