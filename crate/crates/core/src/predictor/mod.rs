//! Purchase-probability model: gradient-boosted depth-1 trees on `(x, p)`.
//!
//! Each boosting round fits one stump to the logistic-loss gradient. Splits
//! are searched exhaustively over every feature at midpoints between
//! consecutive distinct values, and each leaf takes a damped Newton step
//! `-lr * G / (H + 1)`. With a validation split, training stops once the
//! validation AUC has not improved for `patience` rounds and the model is
//! truncated to its best round.

mod auc;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use self::auc::auc;
pub use crate::dataset::{LabeledDataset, Observation};
use crate::error::{Error, Result};
use crate::model::{Matrix, PredictionMatrix, PriceGrid};
use crate::rng;

/// Predictions are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-6;

const L2_DAMPING: f64 = 1.0;
const MODEL_KIND: &str = "boosted_stumps";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rounds: 50,
            learning_rate: 0.1,
            validation_fraction: 0.2,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Depth-1 regression tree: `left` when `features[feature] <= threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    #[inline]
    pub fn contribution(&self, features: &[f64]) -> f64 {
        if features[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityModel {
    kind: String,
    /// Covariates plus the trailing price feature.
    feature_count: usize,
    base_score: f64,
    stumps: Vec<Stump>,
    config: TrainConfig,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    (p / (1.0 - p)).ln()
}

impl ProbabilityModel {
    /// Model predicting `rate` (clamped) everywhere.
    pub fn constant(rate: f64, covariate_dim: usize) -> Self {
        ProbabilityModel::from_stumps(
            logit(rate),
            Vec::new(),
            covariate_dim,
            TrainConfig::default(),
        )
        .expect("no stumps to validate")
    }

    pub fn from_stumps(
        base_score: f64,
        stumps: Vec<Stump>,
        covariate_dim: usize,
        config: TrainConfig,
    ) -> Result<Self> {
        let feature_count = covariate_dim + 1;
        if let Some(s) = stumps.iter().find(|s| s.feature >= feature_count) {
            return Err(Error::input(format!(
                "stump splits on feature {} of {feature_count}",
                s.feature
            )));
        }
        Ok(ProbabilityModel {
            kind: MODEL_KIND.into(),
            feature_count,
            base_score,
            stumps,
            config,
        })
    }

    pub fn covariate_dim(&self) -> usize {
        self.feature_count - 1
    }

    pub fn stumps(&self) -> &[Stump] {
        &self.stumps
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Raw additive score on the logit scale. `features` is `(x, p)`.
    pub fn raw_score(&self, features: &[f64]) -> f64 {
        self.stumps
            .iter()
            .fold(self.base_score, |acc, s| acc + s.contribution(features))
    }

    fn score_features(&self, features: &[f64]) -> f64 {
        sigmoid(self.raw_score(features)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    }

    /// Purchase probability for covariates `x` at price `p`.
    pub fn predict(&self, x: &[f64], price: f64) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut features = Vec::with_capacity(self.feature_count);
        features.extend_from_slice(x);
        features.push(price);
        Ok(self.score_features(&features))
    }

    /// Scores every row of a dataset at its observed price.
    pub fn predict_observed(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        data.rows()
            .iter()
            .map(|r| self.predict(&r.covariates, r.price))
            .collect()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.covariate_dim() {
            return Err(Error::input(format!(
                "covariate dimension {dim}, model expects {}",
                self.covariate_dim()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ProbabilityModel = serde_json::from_str(text)?;
        if model.kind != MODEL_KIND {
            return Err(Error::input(format!("unknown model kind {:?}", model.kind)));
        }
        if model.feature_count == 0 {
            return Err(Error::input("model has no features"));
        }
        ProbabilityModel::from_stumps(
            model.base_score,
            model.stumps,
            model.feature_count - 1,
            model.config,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ProbabilityModel::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-round training trace.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainDiagnostics {
    /// Mean logistic loss on the fitting split, before any round and after each.
    pub train_loss: Vec<f64>,
    pub validation_auc: Vec<f64>,
    /// Rounds kept in the final model.
    pub kept_rounds: usize,
}

pub fn train(data: &LabeledDataset, config: &TrainConfig) -> Result<ProbabilityModel> {
    train_with_diagnostics(data, config).map(|(m, _)| m)
}

pub fn train_with_diagnostics(
    data: &LabeledDataset,
    config: &TrainConfig,
) -> Result<(ProbabilityModel, TrainDiagnostics)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    let (fit_idx, val_idx) = split_indices(data, config);
    let fit = Features::gather(data, &fit_idx);
    let positives = fit.labels.iter().filter(|&&y| y).count();
    let base_rate = positives as f64 / fit.len() as f64;
    let base_score = logit(base_rate);

    if positives == 0 || positives == fit.len() {
        let model =
            ProbabilityModel::from_stumps(base_score, Vec::new(), data.dim(), config.clone())?;
        return Ok((model, TrainDiagnostics::default()));
    }

    let val = (!val_idx.is_empty()).then(|| Features::gather(data, &val_idx));
    let orders = fit.sorted_orders();
    let mut fit_scores = vec![base_score; fit.len()];
    let mut val_scores = vec![base_score; val.as_ref().map_or(0, Features::len)];
    let mut stumps = Vec::with_capacity(config.rounds);
    let mut diag = TrainDiagnostics {
        train_loss: vec![logistic_loss(&fit_scores, &fit.labels)],
        ..Default::default()
    };
    let mut best_auc = f64::NEG_INFINITY;
    let mut best_round = 0;

    let mut grad = vec![0.0; fit.len()];
    let mut hess = vec![0.0; fit.len()];
    for round in 1..=config.rounds {
        for (r, &s) in fit_scores.iter().enumerate() {
            let p = sigmoid(s);
            grad[r] = p - if fit.labels[r] { 1.0 } else { 0.0 };
            hess[r] = p * (1.0 - p);
        }
        let stump = best_stump(&fit, &orders, &grad, &hess, config.learning_rate);
        for (r, s) in fit_scores.iter_mut().enumerate() {
            *s += stump.contribution(fit.row(r));
        }
        stumps.push(stump);
        diag.train_loss
            .push(logistic_loss(&fit_scores, &fit.labels));

        if let Some(val) = &val {
            for (r, s) in val_scores.iter_mut().enumerate() {
                *s += stump.contribution(val.row(r));
            }
            let score = auc(&val_scores, &val.labels)?;
            diag.validation_auc.push(score);
            if score > best_auc {
                best_auc = score;
                best_round = round;
            } else if round - best_round >= config.patience {
                break;
            }
        } else {
            best_round = round;
        }
    }
    stumps.truncate(best_round);
    diag.kept_rounds = best_round;
    let model = ProbabilityModel::from_stumps(base_score, stumps, data.dim(), config.clone())?;
    Ok((model, diag))
}

/// Seeded shuffle split. Early stopping is disabled (empty validation set)
/// when the held-out part would be empty or single-class.
fn split_indices(data: &LabeledDataset, config: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let n = data.len();
    let all: Vec<usize> = (0..n).collect();
    let n_val = (config.validation_fraction * n as f64).round() as usize;
    if n_val == 0 || n_val >= n {
        return (all, Vec::new());
    }
    let mut shuffled = all.clone();
    shuffled.shuffle(&mut rng::stream(config.seed, "validation-split", 0));
    let (val, fit) = shuffled.split_at(n_val);
    let rows = data.rows();
    let has_both = |idx: &[usize]| {
        idx.iter().any(|&i| rows[i].purchased) && idx.iter().any(|&i| !rows[i].purchased)
    };
    if !has_both(val) {
        return (all, Vec::new());
    }
    (fit.to_vec(), val.to_vec())
}

/// Row-major feature block `(x, p)` with labels.
struct Features {
    width: usize,
    values: Vec<f64>,
    labels: Vec<bool>,
}

impl Features {
    fn gather(data: &LabeledDataset, idx: &[usize]) -> Self {
        let width = data.dim() + 1;
        let mut values = Vec::with_capacity(idx.len() * width);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            let row = &data.rows()[i];
            values.extend_from_slice(&row.covariates);
            values.push(row.price);
            labels.push(row.purchased);
        }
        Features {
            width,
            values,
            labels,
        }
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.width..(r + 1) * self.width]
    }

    fn value(&self, r: usize, f: usize) -> f64 {
        self.values[r * self.width + f]
    }

    fn sorted_orders(&self) -> Vec<Vec<usize>> {
        (0..self.width)
            .map(|f| {
                let mut order: Vec<usize> = (0..self.len()).collect();
                order.sort_by(|&a, &b| {
                    self.value(a, f)
                        .total_cmp(&self.value(b, f))
                        .then(a.cmp(&b))
                });
                order
            })
            .collect()
    }
}

fn leaf_weight(g: f64, h: f64, learning_rate: f64) -> f64 {
    -learning_rate * g / (h + L2_DAMPING)
}

fn best_stump(
    data: &Features,
    orders: &[Vec<usize>],
    grad: &[f64],
    hess: &[f64],
    learning_rate: f64,
) -> Stump {
    let g_total: f64 = grad.iter().sum();
    let h_total: f64 = hess.iter().sum();
    let parent = g_total * g_total / (h_total + L2_DAMPING);

    let mut best: Option<(f64, Stump)> = None;
    for (f, order) in orders.iter().enumerate() {
        let (mut g_left, mut h_left) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let r = order[k];
            g_left += grad[r];
            h_left += hess[r];
            let here = data.value(r, f);
            let next = data.value(order[k + 1], f);
            if here == next {
                continue;
            }
            let (g_right, h_right) = (g_total - g_left, h_total - h_left);
            let gain = g_left * g_left / (h_left + L2_DAMPING)
                + g_right * g_right / (h_right + L2_DAMPING)
                - parent;
            if best.as_ref().is_none_or(|(b, _)| gain > *b) {
                let stump = Stump {
                    feature: f,
                    threshold: here + (next - here) / 2.0,
                    left: leaf_weight(g_left, h_left, learning_rate),
                    right: leaf_weight(g_right, h_right, learning_rate),
                };
                best = Some((gain, stump));
            }
        }
    }
    best.map(|(_, s)| s).unwrap_or_else(|| {
        // every feature constant: a single leaf
        let w = leaf_weight(g_total, h_total, learning_rate);
        Stump {
            feature: 0,
            threshold: 0.0,
            left: w,
            right: w,
        }
    })
}

fn logistic_loss(scores: &[f64], labels: &[bool]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let m = if y { -s } else { s };
            // log(1 + e^m), stable for large |m|
            m.max(0.0) + (-m.abs()).exp().ln_1p()
        })
        .sum();
    total / scores.len() as f64
}

/// Scores every (consumer, candidate) pair.
pub fn predict_grid(
    model: &ProbabilityModel,
    consumers: &[Vec<f64>],
    grid: &PriceGrid,
) -> Result<PredictionMatrix> {
    if consumers.len() != grid.n_consumers() {
        return Err(Error::input(format!(
            "{} consumers for a grid of {} rows",
            consumers.len(),
            grid.n_consumers()
        )));
    }
    let cols = grid.n_candidates();
    let mut data = Vec::with_capacity(consumers.len() * cols);
    let mut features = vec![0.0; model.feature_count];
    for (i, x) in consumers.iter().enumerate() {
        model.check_dim(x.len())?;
        features[..x.len()].copy_from_slice(x);
        for j in 0..cols {
            features[x.len()] = grid.price(i, j);
            data.push(model.score_features(&features));
        }
    }
    PredictionMatrix::new(Matrix::new(consumers.len(), cols, data)?)
}
