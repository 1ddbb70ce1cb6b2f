//! Bootstrap estimate of per-(consumer, candidate) prediction uncertainty.
//!
//! `n_bootstrap` models are trained on with-replacement resamples of the
//! training set. Their predictions give a mean `q̄` and a sample standard
//! deviation `σ̂` (denominator `N - 1`) per cell, and the uncertainty used by
//! the robust problem is `Δ = min(κ σ̂, q̂)` with `q̂` from the base model.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Matrix, PredictionMatrix, PriceGrid, UncertaintyMatrix};
use crate::predictor::{self, LabeledDataset, ProbabilityModel, TrainConfig};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub n_bootstrap: usize,
    pub kappa: f64,
    pub seed: u64,
    pub train_config: TrainConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_bootstrap: 20,
            kappa: 1.0,
            seed: 0,
            train_config: TrainConfig::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bootstrap < 2 {
            return Err(Error::config("n_bootstrap must be at least 2"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("kappa must be non-negative"));
        }
        self.train_config.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyEstimate {
    pub qhat: PredictionMatrix,
    pub mean: Matrix,
    pub stddev: Matrix,
    pub delta: UncertaintyMatrix,
    pub kappa: f64,
}

impl UncertaintyEstimate {
    /// Combines per-trial prediction matrices into the estimate.
    pub fn from_ensemble(
        qhat: PredictionMatrix,
        members: &[PredictionMatrix],
        kappa: f64,
    ) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::config("need at least two ensemble members"));
        }
        let shape = qhat.matrix().shape();
        if let Some(m) = members.iter().find(|m| m.matrix().shape() != shape) {
            return Err(Error::input(format!(
                "ensemble member shape {:?} differs from {:?}",
                m.matrix().shape(),
                shape
            )));
        }
        let n = members.len() as f64;
        let cells = shape.0 * shape.1;
        let mut mean = vec![0.0; cells];
        for m in members {
            for (acc, v) in mean.iter_mut().zip(m.matrix().as_slice()) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut var = vec![0.0; cells];
        for m in members {
            for ((acc, v), mu) in var.iter_mut().zip(m.matrix().as_slice()).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let stddev: Vec<f64> = var.into_iter().map(|s| (s / (n - 1.0)).sqrt()).collect();
        let mean = Matrix::new(shape.0, shape.1, mean)?;
        let stddev = Matrix::new(shape.0, shape.1, stddev)?;
        let delta = cap_delta(&qhat, &stddev, kappa)?;
        Ok(UncertaintyEstimate {
            qhat,
            mean,
            stddev,
            delta,
            kappa,
        })
    }

    /// Recomputes `Δ` for another `κ`; the ensemble itself is unchanged.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Ok(UncertaintyEstimate {
            delta: cap_delta(&self.qhat, &self.stddev, kappa)?,
            kappa,
            ..self.clone()
        })
    }

    /// Columns `consumer, candidate, qhat, mean, stddev, delta`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["consumer", "candidate", "qhat", "mean", "stddev", "delta"])?;
        let (rows, cols) = self.mean.shape();
        for i in 0..rows {
            for j in 0..cols {
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    self.qhat.get(i, j).to_string(),
                    self.mean.get(i, j).to_string(),
                    self.stddev.get(i, j).to_string(),
                    self.delta.get(i, j).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn cap_delta(qhat: &PredictionMatrix, stddev: &Matrix, kappa: f64) -> Result<UncertaintyMatrix> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::config("kappa must be non-negative"));
    }
    UncertaintyMatrix::new(qhat.matrix().zip_map(stddev, |q, s| (kappa * s).min(q))?)
}

/// Draws `data.len()` rows uniformly with replacement.
pub fn resample<R: Rng + ?Sized>(data: &LabeledDataset, rng: &mut R) -> Result<LabeledDataset> {
    if data.is_empty() {
        return Err(Error::input("cannot resample an empty dataset"));
    }
    let n = data.len();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    Ok(data.select(&idx))
}

/// Trains the ensemble and derives `q̄`, `σ̂` and `Δ` on the consumer grid.
///
/// Trial `k` owns the streams `(seed, "bootstrap-resample", k)` and
/// `(seed, "bootstrap-train", k)`, so the result does not depend on the
/// order in which trials run.
pub fn estimate_uncertainty(
    train: &LabeledDataset,
    base_model: &ProbabilityModel,
    consumers: &[Vec<f64>],
    grid: &PriceGrid,
    config: &BootstrapConfig,
) -> Result<UncertaintyEstimate> {
    config.validate()?;
    let qhat = predictor::predict_grid(base_model, consumers, grid)?;
    let members = (0..config.n_bootstrap as u64)
        .map(|k| {
            let sample = resample(
                train,
                &mut rng::stream(config.seed, "bootstrap-resample", k),
            )?;
            let train_config = TrainConfig {
                seed: rng::derive_seed(config.seed, "bootstrap-train", k),
                ..config.train_config.clone()
            };
            let model = predictor::train(&sample, &train_config)?;
            predictor::predict_grid(&model, consumers, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    UncertaintyEstimate::from_ensemble(qhat, &members, config.kappa)
}
