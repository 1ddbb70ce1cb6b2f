//! Probit demand generators with known purchase probabilities.
//!
//! Each dataset draws covariates `X` and a price `P`, forms the latent
//! utility `q* = g(X) + h(X) P + ε` with `ε ~ N(0, 2)`, and records a
//! purchase when `q* > 0`. Normal parameters are written as
//! `N(mean, variance)` throughout, so `ε` has standard deviation `√2`.
//! Prices are truncated to be positive by redrawing.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Observation};
use crate::error::{Error, Result};
use crate::model::{PriceAssignment, PriceGrid};
use crate::predictor::ProbabilityModel;
use crate::rng;

/// Variance of the latent noise and of the price draw.
pub const NOISE_VARIANCE: f64 = 2.0;

/// Standard normal CDF, `Φ(z) = erfc(-z/√2) / 2`.
///
/// The complementary form keeps full relative accuracy in the lower tail.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// One of the six synthetic demand models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    dataset_id: u8,
    /// Dataset 2 price sensitivity weights; empty for the others.
    beta: Vec<f64>,
}

impl GeneratorSpec {
    /// Builds dataset `id` (1 to 6). Dataset 2 draws its weights from the
    /// stream `(seed, "spec", 0)`; the other datasets ignore `seed`.
    pub fn new(dataset_id: u8, seed: u64) -> Result<Self> {
        let beta = match dataset_id {
            2 => {
                let mut r = rng::stream(seed, "spec", 0);
                let mut beta: Vec<f64> = (0..5).map(|_| r.sample(StandardNormal)).collect();
                beta.resize(20, 0.0);
                beta
            }
            1 | 3..=6 => Vec::new(),
            _ => {
                return Err(Error::config(format!(
                    "dataset id {dataset_id} is not in 1..=6"
                )))
            }
        };
        Ok(GeneratorSpec { dataset_id, beta })
    }

    /// Dataset 2 with explicit weights.
    pub fn with_beta(beta: Vec<f64>) -> Result<Self> {
        if beta.len() != 20 {
            return Err(Error::input(format!(
                "dataset 2 needs 20 weights, got {}",
                beta.len()
            )));
        }
        Ok(GeneratorSpec {
            dataset_id: 2,
            beta,
        })
    }

    pub fn dataset_id(&self) -> u8 {
        self.dataset_id
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Covariate dimension `n`.
    pub fn dim(&self) -> usize {
        match self.dataset_id {
            1 | 3 | 5 => 1,
            2 => 20,
            _ => 2,
        }
    }

    /// `(g(x), h(x))`.
    pub fn coefficients(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim() {
            return Err(Error::input(format!(
                "dataset {} has {} covariates, got {}",
                self.dataset_id,
                self.dim(),
                x.len()
            )));
        }
        Ok(match self.dataset_id {
            1 | 5 => (x[0], -1.0),
            2 => {
                let bx: f64 = self.beta.iter().zip(x).map(|(b, v)| b * v).sum();
                (5.0, -1.5 * bx)
            }
            3 => (5.0, step(x[0], [-1.2, -1.1, -0.9, -0.8])),
            4 => {
                let shift = if x[1] < 0.0 { 0.1 } else { -0.1 };
                (5.0, step(x[0], [-1.25, -1.1, -0.9, -0.75]) + shift)
            }
            _ => {
                let s = (x[0] + x[1]).abs();
                (4.0 * s, -s)
            }
        })
    }

    fn sample_covariates<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mean = if matches!(self.dataset_id, 1 | 5) {
            5.0
        } else {
            0.0
        };
        (0..self.dim())
            .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Redraws until the price is positive.
    fn sample_price<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        let mean = if matches!(self.dataset_id, 1 | 2) {
            5.0
        } else {
            x[0] + 5.0
        };
        loop {
            let p = mean + NOISE_VARIANCE.sqrt() * rng.sample::<f64, _>(StandardNormal);
            if p > 0.0 {
                return p;
            }
        }
    }
}

/// Piecewise-constant slope on `(-inf,-1), [-1,0), [0,1), [1,inf)`.
fn step(x: f64, levels: [f64; 4]) -> f64 {
    if x < -1.0 {
        levels[0]
    } else if x < 0.0 {
        levels[1]
    } else if x < 1.0 {
        levels[2]
    } else {
        levels[3]
    }
}

/// Draws `n_rows` labelled observations.
pub fn generate_dataset<R: Rng + ?Sized>(
    spec: &GeneratorSpec,
    n_rows: usize,
    rng: &mut R,
) -> Result<LabeledDataset> {
    if n_rows == 0 {
        return Err(Error::input("n_rows must be at least 1"));
    }
    let noise = Normal::new(0.0, NOISE_VARIANCE.sqrt()).expect("positive sd");
    let rows = (0..n_rows)
        .map(|_| {
            let covariates = spec.sample_covariates(rng);
            let price = spec.sample_price(&covariates, rng);
            let (g, h) = spec.coefficients(&covariates).expect("generated dimension");
            let latent = g + h * price + noise.sample(rng);
            Observation {
                covariates,
                price,
                purchased: latent > 0.0,
            }
        })
        .collect();
    LabeledDataset::new(spec.dim(), rows)
}

/// Exact `P(q* > 0)` at covariates `x` and price `p`.
pub fn true_purchase_probability(spec: &GeneratorSpec, x: &[f64], p: f64) -> Result<f64> {
    let (g, h) = spec.coefficients(x)?;
    Ok(normal_cdf((g + h * p) / NOISE_VARIANCE.sqrt()))
}

/// Anything that can report a purchase probability for a consumer and price.
pub trait DemandModel {
    fn purchase_probability(&self, x: &[f64], price: f64) -> Result<f64>;
}

impl DemandModel for GeneratorSpec {
    fn purchase_probability(&self, x: &[f64], price: f64) -> Result<f64> {
        true_purchase_probability(self, x, price)
    }
}

impl DemandModel for ProbabilityModel {
    fn purchase_probability(&self, x: &[f64], price: f64) -> Result<f64> {
        self.predict(x, price)
    }
}

/// Nine candidate prices: the 10th to 90th percentiles of the training prices.
pub fn candidate_prices(train: &LabeledDataset) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::input(
            "cannot derive candidate prices from an empty dataset",
        ));
    }
    let mut prices = train.prices();
    if prices.iter().any(|p| !p.is_finite()) {
        return Err(Error::input("training prices must be finite"));
    }
    prices.sort_by(f64::total_cmp);
    Ok((1..=9)
        .map(|k| percentile(&prices, k as f64 / 10.0))
        .collect())
}

/// Linear interpolation between closest ranks on sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumerOutcome {
    pub consumer: usize,
    pub candidate: usize,
    pub price: f64,
    pub probability: f64,
    pub expected_revenue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub expected_revenue: f64,
    /// Mean Bernoulli revenue over the replications, if any were run.
    pub simulated_revenue: Option<f64>,
    /// Sample standard deviation of per-replication revenue.
    pub simulated_stddev: Option<f64>,
    pub replications: usize,
    pub rows: Vec<ConsumerOutcome>,
}

/// Revenue of `assignment` under the demand model `truth`.
pub fn evaluate_policy<M: DemandModel + ?Sized, R: Rng + ?Sized>(
    assignment: &PriceAssignment,
    consumers: &[Vec<f64>],
    grid: &PriceGrid,
    truth: &M,
    replications: usize,
    rng: &mut R,
) -> Result<PolicyEvaluation> {
    if assignment.len() != consumers.len() || grid.n_consumers() != consumers.len() {
        return Err(Error::input(format!(
            "assignment of {}, {} consumers and a grid of {} rows",
            assignment.len(),
            consumers.len(),
            grid.n_consumers()
        )));
    }
    let rows = consumers
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let candidate = assignment.choice(i);
            if candidate >= grid.n_candidates() {
                return Err(Error::input(format!("candidate {candidate} out of range")));
            }
            let price = grid.price(i, candidate);
            let probability = truth.purchase_probability(x, price)?;
            Ok(ConsumerOutcome {
                consumer: i,
                candidate,
                price,
                probability,
                expected_revenue: price * probability,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let expected_revenue = rows.iter().map(|r| r.expected_revenue).sum();

    let (simulated_revenue, simulated_stddev) = if replications == 0 {
        (None, None)
    } else {
        let draws: Vec<f64> = (0..replications)
            .map(|_| {
                rows.iter()
                    .filter(|r| rng.random::<f64>() < r.probability)
                    .map(|r| r.price)
                    .sum()
            })
            .collect();
        let n = replications as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let sd = if replications > 1 {
            (draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (Some(mean), Some(sd))
    };
    Ok(PolicyEvaluation {
        expected_revenue,
        simulated_revenue,
        simulated_stddev,
        replications,
        rows,
    })
}

/// Per-consumer best candidate under the true model and its expected revenue.
pub fn optimal_baseline<M: DemandModel + ?Sized>(
    consumers: &[Vec<f64>],
    grid: &PriceGrid,
    truth: &M,
) -> Result<(PriceAssignment, f64)> {
    if grid.n_consumers() != consumers.len() {
        return Err(Error::input(format!(
            "{} consumers for a grid of {} rows",
            consumers.len(),
            grid.n_consumers()
        )));
    }
    let mut total = 0.0;
    let mut choices = Vec::with_capacity(consumers.len());
    for (i, x) in consumers.iter().enumerate() {
        let values = (0..grid.n_candidates())
            .map(|j| Ok(grid.price(i, j) * truth.purchase_probability(x, grid.price(i, j))?))
            .collect::<Result<Vec<f64>>>()?;
        let j = crate::model::argmax(values.iter().copied());
        total += values[j];
        choices.push(j);
    }
    Ok((PriceAssignment::new(choices), total))
}

/// Expected revenue at the prices the generator originally drew.
pub fn no_change_revenue<M: DemandModel + ?Sized>(
    consumers: &[Vec<f64>],
    prices: &[f64],
    truth: &M,
) -> Result<f64> {
    if consumers.len() != prices.len() {
        return Err(Error::input(format!(
            "{} consumers for {} prices",
            consumers.len(),
            prices.len()
        )));
    }
    consumers
        .iter()
        .zip(prices)
        .map(|(x, &p)| Ok(p * truth.purchase_probability(x, p)?))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Matrix;
    use proptest::prelude::*;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-1.96) - 0.024_997_895_148_220_435).abs() < 1e-15);
        // lower tail keeps relative precision
        assert!((normal_cdf(-10.0) / 7.619_853_024_160_526e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_one_probabilities() {
        let spec = GeneratorSpec::new(1, 0).unwrap();
        assert_eq!(true_purchase_probability(&spec, &[5.0], 5.0).unwrap(), 0.5);
        let p = true_purchase_probability(&spec, &[6.0], 5.0).unwrap();
        assert!((p - 0.760_249_938_906_523_6).abs() < 1e-12, "{p}");
        assert!(true_purchase_probability(&spec, &[0.0], 1e3).unwrap() < 1e-300);
        assert!(matches!(
            true_purchase_probability(&spec, &[1.0, 2.0], 5.0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn table_rows() {
        let d2 = GeneratorSpec::new(2, 11).unwrap();
        assert_eq!(d2.dim(), 20);
        assert!(d2.beta()[5..].iter().all(|&b| b == 0.0));
        assert!(d2.beta()[..5].iter().all(|&b| b != 0.0));
        assert_eq!(d2, GeneratorSpec::new(2, 11).unwrap());
        assert_ne!(d2, GeneratorSpec::new(2, 12).unwrap());

        let d3 = GeneratorSpec::new(3, 0).unwrap();
        assert_eq!(d3.coefficients(&[-1.5]).unwrap(), (5.0, -1.2));
        assert_eq!(d3.coefficients(&[-1.0]).unwrap(), (5.0, -1.1));
        assert_eq!(d3.coefficients(&[0.0]).unwrap(), (5.0, -0.9));
        assert_eq!(d3.coefficients(&[1.0]).unwrap(), (5.0, -0.8));

        let d4 = GeneratorSpec::new(4, 0).unwrap();
        let (_, h) = d4.coefficients(&[-2.0, -0.5]).unwrap();
        assert!((h - (-1.25 + 0.1)).abs() < 1e-15);
        let (_, h) = d4.coefficients(&[2.0, 0.0]).unwrap();
        assert!((h - (-0.75 - 0.1)).abs() < 1e-15);

        let d6 = GeneratorSpec::new(6, 0).unwrap();
        assert_eq!(d6.coefficients(&[1.0, -3.0]).unwrap(), (8.0, -2.0));
        assert!(GeneratorSpec::new(7, 0).is_err());
        assert!(GeneratorSpec::new(0, 0).is_err());
    }

    #[test]
    fn generated_shape_and_reproducibility() {
        for id in 1..=6 {
            let spec = GeneratorSpec::new(id, 3).unwrap();
            let a = generate_dataset(&spec, 50, &mut rng::stream(1, "data-train", 0)).unwrap();
            let b = generate_dataset(&spec, 50, &mut rng::stream(1, "data-train", 0)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.dim(), spec.dim());
            assert_eq!(a.len(), 50);
        }
        let spec = GeneratorSpec::new(1, 0).unwrap();
        assert!(generate_dataset(&spec, 0, &mut rng::stream(1, "x", 0)).is_err());
    }

    /// `∫∫ Φ((x - p)/√2) φ(x; 5, 1) φ(p; 5, 2) dx dp` by the midpoint rule,
    /// with the price density truncated to `p > 0`.
    fn dataset_one_marginal_rate() -> f64 {
        let density = |v: f64, mean: f64, var: f64| {
            (-(v - mean) * (v - mean) / (2.0 * var)).exp()
                / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        let steps = 800;
        let (lo, hi) = (-5.0, 15.0);
        let h = (hi - lo) / steps as f64;
        let mut total = 0.0;
        for a in 0..steps {
            let x = lo + (a as f64 + 0.5) * h;
            let wx = density(x, 5.0, 1.0);
            for b in 0..steps {
                let p = (b as f64 + 0.5) * h;
                total += wx * density(p, 5.0, 2.0) * normal_cdf((x - p) / 2f64.sqrt());
            }
        }
        let kept = 1.0 - normal_cdf(-5.0 / 2f64.sqrt());
        total * h * h / kept
    }

    #[test]
    fn dataset_one_marginal_rate_matches_integral() {
        let spec = GeneratorSpec::new(1, 0).unwrap();
        let n = 100_000;
        let data = generate_dataset(&spec, n, &mut rng::stream(5, "data-train", 0)).unwrap();
        let rate = data.labels().iter().filter(|&&l| l).count() as f64 / n as f64;
        let truth = dataset_one_marginal_rate();
        let se = (truth * (1.0 - truth) / n as f64).sqrt();
        assert!((rate - truth).abs() < 3.0 * se, "{rate} vs {truth}");
    }

    #[test]
    fn confounded_rate_matches_closed_form() {
        // q* = X - (X + 5 + η) + ε = -5 - η + ε with η, ε of variance 2 each
        let spec = GeneratorSpec::new(5, 0).unwrap();
        let n = 200_000;
        let data = generate_dataset(&spec, n, &mut rng::stream(6, "data-train", 0)).unwrap();
        let rate = data.labels().iter().filter(|&&l| l).count() as f64 / n as f64;
        let truth = normal_cdf(-5.0 / 2.0);
        let se = (truth * (1.0 - truth) / n as f64).sqrt();
        assert!((rate - truth).abs() < 3.0 * se, "{rate} vs {truth}");
    }

    fn priced(prices: &[f64]) -> LabeledDataset {
        let rows = prices
            .iter()
            .map(|&price| Observation {
                covariates: vec![0.0],
                price,
                purchased: false,
            })
            .collect();
        LabeledDataset::new(1, rows).unwrap()
    }

    #[test]
    fn percentiles_of_one_to_hundred() {
        let got = candidate_prices(&priced(&(1..=100).map(f64::from).collect::<Vec<_>>())).unwrap();
        for (k, v) in got.iter().enumerate() {
            let expected = 10.0 * (k + 1) as f64 + 1.0 - 0.1 * (k + 1) as f64;
            assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        }
        assert_eq!(candidate_prices(&priced(&[4.2; 7])).unwrap(), vec![4.2; 9]);
        assert_eq!(candidate_prices(&priced(&[3.0])).unwrap(), vec![3.0; 9]);
        let empty = LabeledDataset::new(1, vec![]).unwrap();
        assert!(matches!(candidate_prices(&empty), Err(Error::Input(_))));
    }

    proptest! {
        #[test]
        fn percentiles_are_sorted_and_bounded(prices in prop::collection::vec(0.01f64..100.0, 1..60)) {
            let got = candidate_prices(&priced(&prices)).unwrap();
            prop_assert_eq!(got.len(), 9);
            prop_assert!(got.windows(2).all(|w| w[0] <= w[1]));
            let lo = prices.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = prices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(got.iter().all(|&v| v >= lo && v <= hi));
        }

        #[test]
        fn decreasing_in_price(id in prop::sample::select(vec![1u8, 3, 4, 5]), x0 in -3.0f64..8.0, x1 in -3.0f64..3.0, p in 0.0f64..9.0, dp in 0.01f64..2.0) {
            let spec = GeneratorSpec::new(id, 0).unwrap();
            let x: Vec<f64> = [x0, x1][..spec.dim()].to_vec();
            let a = true_purchase_probability(&spec, &x, p).unwrap();
            let b = true_purchase_probability(&spec, &x, p + dp).unwrap();
            prop_assert!(b < a);
        }
    }

    fn one_consumer_grid(prices: &[f64]) -> PriceGrid {
        PriceGrid::uniform(1, prices).unwrap()
    }

    #[test]
    fn single_consumer_at_even_odds() {
        // g + h p = 0 at x = 10, p = 10
        let spec = GeneratorSpec::new(1, 0).unwrap();
        let eval = evaluate_policy(
            &PriceAssignment::new(vec![0]),
            &[vec![10.0]],
            &one_consumer_grid(&[10.0]),
            &spec,
            0,
            &mut rng::stream(0, "simulation", 0),
        )
        .unwrap();
        assert_eq!(eval.expected_revenue, 5.0);
        assert_eq!(eval.simulated_revenue, None);
    }

    #[test]
    fn optimal_dominates_every_assignment() {
        let spec = GeneratorSpec::new(6, 0).unwrap();
        let data = generate_dataset(&spec, 6, &mut rng::stream(2, "data-test", 0)).unwrap();
        let consumers = data.covariates();
        let grid = PriceGrid::uniform(6, &[3.0, 4.0, 5.0, 6.0]).unwrap();
        let (_, best) = optimal_baseline(&consumers, &grid, &spec).unwrap();
        let mut r = rng::stream(0, "simulation", 0);
        for code in 0..4usize.pow(6) {
            let choices = (0..6).map(|i| (code / 4usize.pow(i)) % 4).collect();
            let eval = evaluate_policy(
                &PriceAssignment::new(choices),
                &consumers,
                &grid,
                &spec,
                0,
                &mut r,
            )
            .unwrap();
            assert!(eval.expected_revenue <= best + 1e-12);
        }
    }

    #[test]
    fn simulation_concentrates() {
        let spec = GeneratorSpec::new(1, 0).unwrap();
        let data = generate_dataset(&spec, 40, &mut rng::stream(9, "data-test", 0)).unwrap();
        let consumers = data.covariates();
        let grid = PriceGrid::new(Matrix::filled(40, 1, 4.5)).unwrap();
        let assignment = PriceAssignment::new(vec![0; 40]);
        let reps = 10_000;
        let eval = evaluate_policy(
            &assignment,
            &consumers,
            &grid,
            &spec,
            reps,
            &mut rng::stream(9, "simulation", 0),
        )
        .unwrap();
        let sigma: f64 = eval
            .rows
            .iter()
            .map(|r| r.price * r.price * r.probability * (1.0 - r.probability))
            .sum::<f64>()
            .sqrt();
        let gap = (eval.simulated_revenue.unwrap() - eval.expected_revenue).abs();
        assert!(gap < 3.0 * sigma / (reps as f64).sqrt(), "{gap}");
        assert!((eval.simulated_stddev.unwrap() / sigma - 1.0).abs() < 0.05);

        let again = evaluate_policy(
            &assignment,
            &consumers,
            &grid,
            &spec,
            reps,
            &mut rng::stream(9, "simulation", 0),
        )
        .unwrap();
        assert_eq!(eval, again);
    }

    #[test]
    fn no_change_and_shape_errors() {
        let spec = GeneratorSpec::new(1, 0).unwrap();
        let v = no_change_revenue(&[vec![5.0], vec![6.0]], &[5.0, 5.0], &spec).unwrap();
        assert!((v - 5.0 * (0.5 + 0.760_249_938_906_523_6)).abs() < 1e-12);
        assert!(no_change_revenue(&[vec![5.0]], &[5.0, 5.0], &spec).is_err());
        let grid = one_consumer_grid(&[1.0]);
        let mut r = rng::stream(0, "simulation", 0);
        assert!(evaluate_policy(
            &PriceAssignment::new(vec![0, 0]),
            &[vec![1.0]],
            &grid,
            &spec,
            0,
            &mut r
        )
        .is_err());
        assert!(evaluate_policy(
            &PriceAssignment::new(vec![3]),
            &[vec![1.0]],
            &grid,
            &spec,
            0,
            &mut r
        )
        .is_err());
    }
}
