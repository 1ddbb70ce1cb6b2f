//! End-to-end experiment pipeline.
//!
//! Per seed: draw or load data, train the base model, pick candidate prices,
//! bootstrap the uncertainty, then for every `(κ, α)` cell build the robust
//! instance with `Γ = α |I^test|`, solve it and score the policy against the
//! true demand model. Every random draw comes from a named stream of the
//! run seed: `data-train`, `data-test`, `split`, `train`, `truth`,
//! `bootstrap` and `simulation`.

mod config;
mod output;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use config::{DataSource, ExperimentConfig, PriceChangeSpec, SolverChoice};
pub use output::{aggregate, plot_series, write_outputs, AggregateRow, PlotRow, Stat};

use crate::bootstrap::{estimate_uncertainty, BootstrapConfig, UncertaintyEstimate};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::exact::solve_exact;
use crate::ingestion::load_dataset_csv;
use crate::lagrangian::{heuristic_solve_traced, TraceRow};
use crate::model::{LinearConstraint, PriceGrid, PricingInstance, RobustBudget, SolveReport};
use crate::predictor::{self, auc, ProbabilityModel, TrainConfig};
use crate::rng;
use crate::synthetic::{
    candidate_prices, evaluate_policy, generate_dataset, no_change_revenue, optimal_baseline,
    DemandModel, GeneratorSpec,
};

/// The demand model revenues are scored against.
#[derive(Clone, Debug, PartialEq)]
pub enum Truth {
    Synthetic(GeneratorSpec),
    /// Fitted on the held-out half of a transaction file.
    Fitted(ProbabilityModel),
}

impl DemandModel for Truth {
    fn purchase_probability(&self, x: &[f64], price: f64) -> Result<f64> {
        match self {
            Truth::Synthetic(spec) => spec.purchase_probability(x, price),
            Truth::Fitted(model) => model.purchase_probability(x, price),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub truth: Truth,
    pub candidates: Vec<f64>,
}

fn train_config(config: &ExperimentConfig, seed: u64, label: &str) -> TrainConfig {
    TrainConfig {
        seed: rng::derive_seed(seed, label, 0),
        ..config.train.clone()
    }
}

pub fn prepare_data(config: &ExperimentConfig, seed: u64) -> Result<PreparedData> {
    match &config.source {
        DataSource::Synthetic {
            dataset_id,
            n_train,
            n_test,
        } => {
            let spec = GeneratorSpec::new(*dataset_id, seed)?;
            let train = generate_dataset(&spec, *n_train, &mut rng::stream(seed, "data-train", 0))?;
            let test = generate_dataset(&spec, *n_test, &mut rng::stream(seed, "data-test", 0))?;
            let candidates = candidate_prices(&train)?;
            Ok(PreparedData {
                train,
                test,
                truth: Truth::Synthetic(spec),
                candidates,
            })
        }
        DataSource::Csv { path, schema } => {
            let loaded = load_dataset_csv(path, schema)?;
            let n = loaded.dataset.len();
            if n < 2 {
                return Err(Error::input(format!(
                    "{} has {n} usable rows, need at least 2",
                    path.display()
                )));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng::stream(seed, "split", 0));
            let (a, b) = idx.split_at(n / 2);
            let (mut train_idx, mut test_idx) = (a.to_vec(), b.to_vec());
            train_idx.sort_unstable();
            test_idx.sort_unstable();
            let train = loaded.dataset.select(&train_idx);
            let test = loaded.dataset.select(&test_idx);
            let truth = predictor::train(&test, &train_config(config, seed, "truth"))?;
            Ok(PreparedData {
                train,
                test,
                truth: Truth::Fitted(truth),
                candidates: schema.price_grid.clone(),
            })
        }
    }
}

pub fn train_base_model(
    config: &ExperimentConfig,
    data: &PreparedData,
    seed: u64,
) -> Result<ProbabilityModel> {
    predictor::train(&data.train, &train_config(config, seed, "train"))
}

/// Test AUC of `model`, or `None` when the test labels are single-class.
pub fn test_auc(model: &ProbabilityModel, test: &LabeledDataset) -> Result<Option<f64>> {
    match auc(&model.predict_observed(test)?, &test.labels()) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn test_grid(data: &PreparedData) -> Result<PriceGrid> {
    PriceGrid::uniform(data.test.len(), &data.candidates)
}

/// Bootstrap estimate at the first configured `κ`.
pub fn estimate(
    config: &ExperimentConfig,
    data: &PreparedData,
    base: &ProbabilityModel,
    seed: u64,
) -> Result<UncertaintyEstimate> {
    let bootstrap = BootstrapConfig {
        n_bootstrap: config.n_bootstrap,
        kappa: config.kappas[0],
        seed: rng::derive_seed(seed, "bootstrap", 0),
        train_config: config.train.clone(),
    };
    estimate_uncertainty(
        &data.train,
        base,
        &data.test.covariates(),
        &test_grid(data)?,
        &bootstrap,
    )
}

pub fn build_instance(
    config: &ExperimentConfig,
    grid: &PriceGrid,
    estimate: &UncertaintyEstimate,
    alpha: f64,
) -> Result<PricingInstance> {
    let n = grid.n_consumers();
    let constraints = config
        .price_change
        .iter()
        .map(|pc| LinearConstraint::price_change_limit(&pc.mask, pc.beta, n))
        .collect();
    PricingInstance::new(
        grid.clone(),
        estimate.qhat.clone(),
        estimate.delta.clone(),
        RobustBudget::from_ratio(alpha, estimate.kappa, n)?,
        constraints,
    )
}

/// One solve of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub dataset: String,
    pub alpha: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// `exact` or `heuristic`.
    pub solver: String,
    /// Concrete method, e.g. `exact/knapsack_dp`.
    pub method: String,
    pub status: String,
    /// Worst-case objective of the returned assignment.
    pub objective: Option<f64>,
    pub nominal_objective: Option<f64>,
    pub upper_bound: Option<f64>,
    pub expected_revenue: Option<f64>,
    pub simulated_revenue: Option<f64>,
    pub optimal_revenue: f64,
    pub no_change_revenue: f64,
    pub test_auc: Option<f64>,
    pub iterations: Option<usize>,
    pub feasible: Option<bool>,
}

/// Wall times live apart from the results so that `results.csv` is
/// reproducible byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub seed: u64,
    pub alpha: f64,
    pub kappa: f64,
    pub solver: String,
    pub wall_time: f64,
}

/// Assignment chosen for each consumer in one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub seed: u64,
    pub alpha: f64,
    pub kappa: f64,
    pub solver: String,
    pub consumer: usize,
    pub candidate: usize,
    pub price: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellTrace {
    pub alpha: f64,
    pub kappa: f64,
    pub rows: Vec<TraceRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub model: ProbabilityModel,
    /// One estimate per configured `κ`, in order.
    pub estimates: Vec<UncertaintyEstimate>,
    pub results: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
    pub solutions: Vec<SolutionRow>,
    pub traces: Vec<CellTrace>,
}

/// Outcome of one solver call, with failures kept as data.
struct Attempt {
    status: &'static str,
    report: Option<SolveReport>,
    wall_time: f64,
    trace: Option<Vec<TraceRow>>,
}

fn attempt_exact(config: &ExperimentConfig, instance: &PricingInstance) -> Result<Attempt> {
    let start = std::time::Instant::now();
    let (status, report) = match solve_exact(instance, &config.exact) {
        Ok(r) => ("optimal", Some(r)),
        Err(Error::Timeout { incumbent, .. }) => ("timeout", incumbent.map(|b| *b)),
        Err(Error::Infeasible) => ("infeasible", None),
        Err(Error::Capability(_)) => ("unsupported", None),
        Err(e) => return Err(e),
    };
    Ok(Attempt {
        status,
        report,
        wall_time: start.elapsed().as_secs_f64(),
        trace: None,
    })
}

fn attempt_heuristic(config: &ExperimentConfig, instance: &PricingInstance) -> Result<Attempt> {
    let start = std::time::Instant::now();
    let (report, trace) = heuristic_solve_traced(instance, &config.heuristic)?;
    let status = if report.feasible {
        "feasible"
    } else {
        "no_feasible_iterate"
    };
    Ok(Attempt {
        status,
        report: Some(report),
        wall_time: start.elapsed().as_secs_f64(),
        trace: Some(trace),
    })
}

pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    config.validate()?;
    let data = prepare_data(config, seed)?;
    let model = train_base_model(config, &data, seed)?;
    let auc = test_auc(&model, &data.test)?;
    let grid = test_grid(&data)?;
    let consumers = data.test.covariates();
    let (_, optimal_revenue) = optimal_baseline(&consumers, &grid, &data.truth)?;
    let no_change = no_change_revenue(&consumers, &data.test.prices(), &data.truth)?;

    let first = estimate(config, &data, &model, seed)?;
    let estimates = config
        .kappas
        .iter()
        .map(|&k| first.with_kappa(k))
        .collect::<Result<Vec<_>>>()?;

    let mut outcome = SeedOutcome {
        seed,
        model,
        estimates: Vec::new(),
        results: Vec::new(),
        timings: Vec::new(),
        solutions: Vec::new(),
        traces: Vec::new(),
    };
    let mut cell = 0u64;
    for est in &estimates {
        for &alpha in &config.alphas {
            let instance = build_instance(config, &grid, est, alpha)?;
            let mut attempts = Vec::new();
            if config.solver.runs_exact() {
                attempts.push(("exact", attempt_exact(config, &instance)?));
            }
            if config.solver.runs_heuristic() {
                attempts.push(("heuristic", attempt_heuristic(config, &instance)?));
            }
            for (solver, attempt) in attempts {
                let evaluation = attempt
                    .report
                    .as_ref()
                    .map(|r| {
                        evaluate_policy(
                            &r.assignment,
                            &consumers,
                            &grid,
                            &data.truth,
                            config.replications,
                            &mut rng::stream(seed, "simulation", cell),
                        )
                    })
                    .transpose()?;
                cell += 1;
                let report = attempt.report.as_ref();
                outcome.results.push(ResultRow {
                    seed,
                    dataset: config.dataset_label(),
                    alpha,
                    kappa: est.kappa,
                    gamma: instance.gamma(),
                    solver: solver.into(),
                    method: report.map_or_else(|| solver.to_string(), |r| r.method.to_string()),
                    status: attempt.status.into(),
                    objective: report.map(|r| r.worst_case_value),
                    nominal_objective: report.map(|r| r.nominal_value),
                    upper_bound: report.and_then(|r| r.upper_bound),
                    expected_revenue: evaluation.as_ref().map(|e| e.expected_revenue),
                    simulated_revenue: evaluation.as_ref().and_then(|e| e.simulated_revenue),
                    optimal_revenue,
                    no_change_revenue: no_change,
                    test_auc: auc,
                    iterations: report.map(|r| r.iterations),
                    feasible: report.map(|r| r.feasible),
                });
                outcome.timings.push(TimingRow {
                    seed,
                    alpha,
                    kappa: est.kappa,
                    solver: solver.into(),
                    wall_time: attempt.wall_time,
                });
                if let Some(r) = report {
                    let prices = r.assignment.prices(&grid);
                    outcome.solutions.extend(
                        r.assignment.choices().iter().zip(prices).enumerate().map(
                            |(i, (&j, price))| SolutionRow {
                                seed,
                                alpha,
                                kappa: est.kappa,
                                solver: solver.into(),
                                consumer: i,
                                candidate: j,
                                price,
                            },
                        ),
                    );
                }
                if let (true, Some(rows)) = (config.write_traces, attempt.trace) {
                    outcome.traces.push(CellTrace {
                        alpha,
                        kappa: est.kappa,
                        rows,
                    });
                }
            }
        }
    }
    outcome.estimates = estimates;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub seeds: Vec<SeedOutcome>,
}

impl ExperimentReport {
    pub fn results(&self) -> impl Iterator<Item = &ResultRow> {
        self.seeds.iter().flat_map(|s| &s.results)
    }
}

/// Runs every configured seed in order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let seeds = config
        .seeds
        .iter()
        .map(|&s| run_seed(config, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { seeds })
}
