//! Problem representation shared by every solver.
//!
//! A pricing instance offers each consumer `i` one price out of a row of
//! candidates `P[i][j]`. The seller believes consumer `i` buys at candidate
//! `j` with probability `qhat[i][j]`, but an adversary may lower that belief
//! by `gamma_i * delta[i][j]` with `0 <= gamma_i <= 1` and `sum gamma <= Gamma`.
//!
//! For a fixed assignment the adversary's problem is a continuous knapsack
//! over the per-consumer losses `c_i = P[i][j(i)] * delta[i][j(i)]`, solved
//! greedily by [`worst_case_objective`]. Its LP dual, evaluated by
//! [`dual_value`], reads
//!
//! ```text
//! sum_i (P q̂)_i - sum_i max(0, c_i - nu) - Gamma * nu,   nu >= 0
//! ```
//!
//! which is concave and piecewise linear in `nu` with kinks at the `c_i`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix indexed by (consumer, candidate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::input("ragged matrix rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(shape_error("zip_map", self.shape(), other.shape()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

fn shape_error(what: &str, want: (usize, usize), got: (usize, usize)) -> Error {
    Error::input(format!(
        "{what}: shape {}x{} does not match {}x{}",
        got.0, got.1, want.0, want.1
    ))
}

/// Candidate prices, one row per consumer. All entries are strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid(Matrix);

impl PriceGrid {
    pub fn new(prices: Matrix) -> Result<Self> {
        if prices.cols() == 0 {
            return Err(Error::input("price grid needs at least one candidate"));
        }
        if let Some(bad) = prices
            .as_slice()
            .iter()
            .find(|&&p| !(p > 0.0 && p.is_finite()))
        {
            return Err(Error::input(format!(
                "price {bad} is not strictly positive"
            )));
        }
        Ok(PriceGrid(prices))
    }

    /// Every consumer gets the same candidate list.
    pub fn uniform(n_consumers: usize, candidates: &[f64]) -> Result<Self> {
        let data = candidates.repeat(n_consumers);
        PriceGrid::new(Matrix::new(n_consumers, candidates.len(), data)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n_consumers(&self) -> usize {
        self.0.rows()
    }

    pub fn n_candidates(&self) -> usize {
        self.0.cols()
    }

    #[inline]
    pub fn price(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

/// Predicted purchase probabilities `q̂`, entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix(Matrix);

impl PredictionMatrix {
    pub fn new(qhat: Matrix) -> Result<Self> {
        if let Some(bad) = qhat.as_slice().iter().find(|&&q| !(0.0..=1.0).contains(&q)) {
            return Err(Error::input(format!("probability {bad} outside [0, 1]")));
        }
        Ok(PredictionMatrix(qhat))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

/// Uncertainty magnitudes `Δ`. Validated against predictions by
/// [`PricingInstance::new`], which requires `0 <= Δ <= q̂` entrywise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyMatrix(Matrix);

impl UncertaintyMatrix {
    pub fn new(delta: Matrix) -> Result<Self> {
        if let Some(bad) = delta
            .as_slice()
            .iter()
            .find(|&&d| !(d >= 0.0 && d.is_finite()))
        {
            return Err(Error::input(format!("uncertainty {bad} is negative")));
        }
        Ok(UncertaintyMatrix(delta))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        UncertaintyMatrix(Matrix::filled(rows, cols, 0.0))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

/// Budget of uncertainty: how much total degradation mass the adversary may spend.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustBudget {
    gamma: f64,
    alpha: f64,
    kappa: f64,
}

impl RobustBudget {
    /// `Gamma = alpha * n_consumers`.
    pub fn from_ratio(alpha: f64, kappa: f64, n_consumers: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::input(format!("alpha {alpha} outside [0, 1]")));
        }
        Self::absolute(alpha * n_consumers as f64, kappa, n_consumers)
    }

    /// An absolute `Gamma`, clamped to `n_consumers`.
    pub fn absolute(gamma: f64, kappa: f64, n_consumers: usize) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::input(format!(
                "budget {gamma} must be a non-negative number"
            )));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::input(format!("kappa {kappa} must be non-negative")));
        }
        let n = n_consumers as f64;
        let gamma = gamma.min(n);
        let alpha = if n_consumers == 0 { 0.0 } else { gamma / n };
        Ok(RobustBudget {
            gamma,
            alpha,
            kappa,
        })
    }

    pub fn nominal() -> Self {
        RobustBudget {
            gamma: 0.0,
            alpha: 0.0,
            kappa: 0.0,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// A separable side constraint `f(z) = sum_ij coef[i][j] z[i][j] - bound <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coefficients: Matrix,
    pub bound: f64,
}

impl LinearConstraint {
    pub fn new(coefficients: Matrix, bound: f64) -> Self {
        LinearConstraint {
            coefficients,
            bound,
        }
    }

    /// Caps how many consumers may receive a candidate flagged in `mask`:
    /// `sum_i sum_j mask[j] z[i][j] <= beta * n_consumers`.
    pub fn price_change_limit(mask: &[f64], beta: f64, n_consumers: usize) -> Self {
        let coefficients = Matrix::new(n_consumers, mask.len(), mask.repeat(n_consumers))
            .expect("mask repeat has matching length");
        LinearConstraint {
            coefficients,
            bound: beta * n_consumers as f64,
        }
    }

    pub fn evaluate(&self, assignment: &PriceAssignment) -> Result<f64> {
        let (rows, cols) = self.coefficients.shape();
        if assignment.len() != rows {
            return Err(Error::input(format!(
                "constraint covers {rows} consumers, assignment has {}",
                assignment.len()
            )));
        }
        let mut total = 0.0;
        for (i, &j) in assignment.choices().iter().enumerate() {
            if j >= cols {
                return Err(Error::input(format!(
                    "candidate {j} out of range for constraint"
                )));
            }
            total += self.coefficients.get(i, j);
        }
        Ok(total - self.bound)
    }

    /// True when every coefficient is 0 or 1, the knapsack structure the
    /// exact dynamic program supports.
    pub fn is_binary(&self) -> bool {
        self.coefficients
            .as_slice()
            .iter()
            .all(|&a| a == 0.0 || a == 1.0)
    }
}

/// Complete input to any solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingInstance {
    grid: PriceGrid,
    predictions: PredictionMatrix,
    uncertainty: UncertaintyMatrix,
    budget: RobustBudget,
    constraints: Vec<LinearConstraint>,
}

impl PricingInstance {
    pub fn new(
        grid: PriceGrid,
        predictions: PredictionMatrix,
        uncertainty: UncertaintyMatrix,
        budget: RobustBudget,
        constraints: Vec<LinearConstraint>,
    ) -> Result<Self> {
        let shape = grid.matrix().shape();
        if predictions.matrix().shape() != shape {
            return Err(shape_error(
                "predictions",
                shape,
                predictions.matrix().shape(),
            ));
        }
        if uncertainty.matrix().shape() != shape {
            return Err(shape_error(
                "uncertainty",
                shape,
                uncertainty.matrix().shape(),
            ));
        }
        for (k, c) in constraints.iter().enumerate() {
            if c.coefficients.shape() != shape {
                return Err(shape_error(
                    &format!("constraint {k}"),
                    shape,
                    c.coefficients.shape(),
                ));
            }
        }
        let over = predictions
            .matrix()
            .as_slice()
            .iter()
            .zip(uncertainty.matrix().as_slice())
            .position(|(q, d)| d > q);
        if let Some(pos) = over {
            return Err(Error::input(format!(
                "uncertainty exceeds prediction at consumer {}, candidate {}",
                pos / shape.1,
                pos % shape.1
            )));
        }
        let n = shape.0 as f64;
        let budget = RobustBudget {
            gamma: budget.gamma.min(n),
            ..budget
        };
        Ok(PricingInstance {
            grid,
            predictions,
            uncertainty,
            budget,
            constraints,
        })
    }

    pub fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    pub fn predictions(&self) -> &PredictionMatrix {
        &self.predictions
    }

    pub fn uncertainty(&self) -> &UncertaintyMatrix {
        &self.uncertainty
    }

    pub fn budget(&self) -> RobustBudget {
        self.budget
    }

    pub fn gamma(&self) -> f64 {
        self.budget.gamma
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn n_consumers(&self) -> usize {
        self.grid.n_consumers()
    }

    pub fn n_candidates(&self) -> usize {
        self.grid.n_candidates()
    }

    /// Nominal expected revenue `P q̂` of offering candidate `j` to consumer `i`.
    #[inline]
    pub fn revenue(&self, i: usize, j: usize) -> f64 {
        self.grid.price(i, j) * self.predictions.get(i, j)
    }

    /// Worst-case revenue loss `P Δ` of offering candidate `j` to consumer `i`.
    #[inline]
    pub fn loss(&self, i: usize, j: usize) -> f64 {
        self.grid.price(i, j) * self.uncertainty.get(i, j)
    }

    /// Largest `P Δ` over the instance, 0 when empty.
    pub fn max_loss(&self) -> f64 {
        let (rows, cols) = self.grid.matrix().shape();
        (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| self.loss(i, j))
            .fold(0.0, f64::max)
    }

    /// Same data, different budget.
    pub fn with_budget(&self, budget: RobustBudget) -> Result<Self> {
        PricingInstance::new(
            self.grid.clone(),
            self.predictions.clone(),
            self.uncertainty.clone(),
            budget,
            self.constraints.clone(),
        )
    }

    pub fn with_constraints(&self, constraints: Vec<LinearConstraint>) -> Result<Self> {
        PricingInstance::new(
            self.grid.clone(),
            self.predictions.clone(),
            self.uncertainty.clone(),
            self.budget,
            constraints,
        )
    }

    pub(crate) fn check_assignment(&self, assignment: &PriceAssignment) -> Result<()> {
        if assignment.len() != self.n_consumers() {
            return Err(Error::input(format!(
                "assignment covers {} consumers, instance has {}",
                assignment.len(),
                self.n_consumers()
            )));
        }
        if let Some(&j) = assignment
            .choices()
            .iter()
            .find(|&&j| j >= self.n_candidates())
        {
            return Err(Error::input(format!(
                "candidate index {j} out of range (|J| = {})",
                self.n_candidates()
            )));
        }
        Ok(())
    }
}

/// One chosen candidate index per consumer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PriceAssignment(Vec<usize>);

impl PriceAssignment {
    pub fn new(choices: Vec<usize>) -> Self {
        PriceAssignment(choices)
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn choice(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Prices the assignment offers, one per consumer.
    pub fn prices(&self, grid: &PriceGrid) -> Vec<f64> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &j)| grid.price(i, j))
            .collect()
    }
}

/// Adversary's degradation weights `gamma_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversaryResponse {
    pub gamma: Vec<f64>,
}

/// Dual multipliers of the adversary's LP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub mu: Vec<f64>,
    pub nu: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Breakpoint,
    KnapsackDp,
    BruteForce,
    Heuristic,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMethod::Breakpoint => "exact/breakpoint",
            SolveMethod::KnapsackDp => "exact/knapsack_dp",
            SolveMethod::BruteForce => "exact/brute_force",
            SolveMethod::Heuristic => "heuristic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub assignment: PriceAssignment,
    pub nominal_value: f64,
    pub worst_case_value: f64,
    pub dual: Option<DualCertificate>,
    /// Lagrange multipliers of the side constraints (heuristic only).
    pub multipliers: Option<Vec<f64>>,
    /// A valid upper bound on the robust optimum, when one was computed.
    pub upper_bound: Option<f64>,
    pub iterations: usize,
    pub wall_time: f64,
    pub feasible: bool,
    pub method: SolveMethod,
}

impl SolveReport {
    /// Evaluates `assignment` on `instance` and fills the value fields.
    pub(crate) fn evaluate(
        instance: &PricingInstance,
        assignment: PriceAssignment,
        method: SolveMethod,
    ) -> Result<Self> {
        let nominal_value = nominal_objective(&assignment, instance)?;
        let (worst_case_value, _) = worst_case_objective(&assignment, instance)?;
        let (feasible, _) = check_feasibility(&assignment, instance.constraints())?;
        Ok(SolveReport {
            assignment,
            nominal_value,
            worst_case_value,
            dual: None,
            multipliers: None,
            upper_bound: None,
            iterations: 0,
            wall_time: 0.0,
            feasible,
            method,
        })
    }
}

/// Expected revenue under the point predictions.
pub fn nominal_objective(assignment: &PriceAssignment, instance: &PricingInstance) -> Result<f64> {
    instance.check_assignment(assignment)?;
    Ok(assignment
        .choices()
        .iter()
        .enumerate()
        .map(|(i, &j)| instance.revenue(i, j))
        .sum())
}

fn chosen_losses(assignment: &PriceAssignment, instance: &PricingInstance) -> Vec<f64> {
    assignment
        .choices()
        .iter()
        .enumerate()
        .map(|(i, &j)| instance.loss(i, j))
        .collect()
}

/// Expected revenue after the adversary's best response.
///
/// The adversary fully degrades the `floor(Gamma)` consumers with the largest
/// losses and the next one fractionally. Ties go to the lower consumer index.
pub fn worst_case_objective(
    assignment: &PriceAssignment,
    instance: &PricingInstance,
) -> Result<(f64, AdversaryResponse)> {
    let nominal = nominal_objective(assignment, instance)?;
    let losses = chosen_losses(assignment, instance);
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));

    let mut gamma = vec![0.0; losses.len()];
    let mut remaining = instance.gamma();
    let mut degraded = 0.0;
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let weight = remaining.min(1.0);
        gamma[i] = weight;
        degraded += weight * losses[i];
        remaining -= weight;
    }
    Ok((nominal - degraded, AdversaryResponse { gamma }))
}

/// Dual objective at a fixed `nu`, with the componentwise-optimal `mu`.
pub fn dual_value(
    assignment: &PriceAssignment,
    instance: &PricingInstance,
    nu: f64,
) -> Result<(f64, DualCertificate)> {
    if !(nu >= 0.0) {
        return Err(Error::input(format!("nu = {nu} must be non-negative")));
    }
    let nominal = nominal_objective(assignment, instance)?;
    let mu: Vec<f64> = chosen_losses(assignment, instance)
        .into_iter()
        .map(|c| (c - nu).max(0.0))
        .collect();
    let value = nominal - mu.iter().sum::<f64>() - instance.gamma() * nu;
    Ok((value, DualCertificate { mu, nu }))
}

/// Evaluates every constraint; feasible when all `f_k <= 0`.
pub fn check_feasibility(
    assignment: &PriceAssignment,
    constraints: &[LinearConstraint],
) -> Result<(bool, Vec<f64>)> {
    let values = constraints
        .iter()
        .map(|c| c.evaluate(assignment))
        .collect::<Result<Vec<_>>>()?;
    Ok((values.iter().all(|&f| f <= 0.0), values))
}

/// Per-consumer argmax of `P q̂`, ties to the lower candidate index.
pub fn nominal_argmax(instance: &PricingInstance) -> PriceAssignment {
    let choices = (0..instance.n_consumers())
        .map(|i| argmax((0..instance.n_candidates()).map(|j| instance.revenue(i, j))))
        .collect();
    PriceAssignment::new(choices)
}

/// Index of the first maximum.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (j, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = j;
            best_value = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(
        prices: &[&[f64]],
        qhat: &[&[f64]],
        delta: &[&[f64]],
        gamma: f64,
    ) -> PricingInstance {
        let rows = |m: &[&[f64]]| {
            Matrix::from_rows(&m.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
        };
        let n = prices.len();
        PricingInstance::new(
            PriceGrid::new(rows(prices)).unwrap(),
            PredictionMatrix::new(rows(qhat)).unwrap(),
            UncertaintyMatrix::new(rows(delta)).unwrap(),
            RobustBudget::absolute(gamma, 1.0, n).unwrap(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn nominal_single_and_additive() {
        let one = instance(&[&[10.0]], &[&[0.5]], &[&[0.0]], 0.0);
        assert_eq!(
            nominal_objective(&PriceAssignment::new(vec![0]), &one).unwrap(),
            5.0
        );
        let two = instance(
            &[&[10.0], &[20.0]],
            &[&[0.5], &[0.25]],
            &[&[0.0], &[0.0]],
            0.0,
        );
        assert_eq!(
            nominal_objective(&PriceAssignment::new(vec![0, 0]), &two).unwrap(),
            10.0
        );
    }

    #[test]
    fn zero_probability_consumer_contributes_nothing() {
        let inst = instance(
            &[&[10.0], &[3.0]],
            &[&[0.5], &[0.0]],
            &[&[0.0], &[0.0]],
            0.0,
        );
        assert_eq!(
            nominal_objective(&PriceAssignment::new(vec![0, 0]), &inst).unwrap(),
            5.0
        );
        let other = instance(
            &[&[10.0], &[99.0]],
            &[&[0.5], &[0.0]],
            &[&[0.0], &[0.0]],
            0.0,
        );
        assert_eq!(
            nominal_objective(&PriceAssignment::new(vec![0, 0]), &other).unwrap(),
            5.0
        );
    }

    #[test]
    fn shape_mismatch_is_input_error() {
        let inst = instance(&[&[10.0]], &[&[0.5]], &[&[0.0]], 0.0);
        assert!(matches!(
            nominal_objective(&PriceAssignment::new(vec![0, 0]), &inst),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            nominal_objective(&PriceAssignment::new(vec![3]), &inst),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn worst_case_single_consumer() {
        let inst = instance(&[&[10.0]], &[&[0.5]], &[&[0.2]], 1.0);
        let z = PriceAssignment::new(vec![0]);
        let (v, resp) = worst_case_objective(&z, &inst).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        assert_eq!(resp.gamma, vec![1.0]);

        let inst0 = inst
            .with_budget(RobustBudget::absolute(0.0, 1.0, 1).unwrap())
            .unwrap();
        let (v0, resp0) = worst_case_objective(&z, &inst0).unwrap();
        assert_eq!(v0, 5.0);
        assert_eq!(resp0.gamma, vec![0.0]);
    }

    #[test]
    fn worst_case_fractional_budget() {
        // nominal 20, losses c = (3, 2, 1)
        let inst = instance(
            &[&[10.0], &[10.0], &[10.0]],
            &[&[0.8], &[0.7], &[0.5]],
            &[&[0.3], &[0.2], &[0.1]],
            1.5,
        );
        let z = PriceAssignment::new(vec![0, 0, 0]);
        assert!((nominal_objective(&z, &inst).unwrap() - 20.0).abs() < 1e-12);
        let (v, resp) = worst_case_objective(&z, &inst).unwrap();
        assert!((v - 16.0).abs() < 1e-9);
        assert_eq!(resp.gamma, vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn tied_losses_prefer_lower_index() {
        let inst = instance(
            &[&[10.0], &[10.0]],
            &[&[0.5], &[0.5]],
            &[&[0.1], &[0.1]],
            1.0,
        );
        let (_, resp) = worst_case_objective(&PriceAssignment::new(vec![0, 0]), &inst).unwrap();
        assert_eq!(resp.gamma, vec![1.0, 0.0]);
    }

    #[test]
    fn dual_value_examples() {
        let inst = instance(
            &[&[10.0], &[10.0], &[10.0]],
            &[&[0.8], &[0.7], &[0.5]],
            &[&[0.3], &[0.2], &[0.1]],
            1.5,
        );
        let z = PriceAssignment::new(vec![0, 0, 0]);
        let (v, cert) = dual_value(&z, &inst, 2.0).unwrap();
        assert!((v - 16.0).abs() < 1e-9);
        assert!((cert.mu[0] - 1.0).abs() < 1e-12 && cert.mu[1] == 0.0 && cert.mu[2] == 0.0);

        let (v, cert) = dual_value(&z, &inst, 5.0).unwrap();
        assert!(cert.mu.iter().all(|&m| m == 0.0));
        assert!((v - (20.0 - 1.5 * 5.0)).abs() < 1e-9);

        let (v, cert) = dual_value(&z, &inst, 0.0).unwrap();
        assert!((v - 14.0).abs() < 1e-9);
        assert!((cert.mu[0] - 3.0).abs() < 1e-12);

        assert!(matches!(dual_value(&z, &inst, -0.1), Err(Error::Input(_))));
    }

    #[test]
    fn feasibility_examples() {
        let z = PriceAssignment::new(vec![1]);
        assert_eq!(check_feasibility(&z, &[]).unwrap(), (true, vec![]));

        let zero = LinearConstraint::new(Matrix::filled(1, 2, 0.0), 1.0);
        assert_eq!(check_feasibility(&z, &[zero]).unwrap(), (true, vec![-1.0]));

        let forced = LinearConstraint::new(Matrix::new(1, 2, vec![0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(
            check_feasibility(&z, &[forced]).unwrap(),
            (false, vec![1.0])
        );
    }

    #[test]
    fn budget_clamps_and_validates() {
        let b = RobustBudget::absolute(7.5, 1.0, 3).unwrap();
        assert_eq!(b.gamma(), 3.0);
        assert_eq!(RobustBudget::from_ratio(0.5, 1.0, 9).unwrap().gamma(), 4.5);
        assert!(RobustBudget::from_ratio(1.5, 1.0, 9).is_err());
        assert!(RobustBudget::absolute(-1.0, 1.0, 9).is_err());
    }

    #[test]
    fn instance_rejects_delta_above_qhat() {
        let grid = PriceGrid::uniform(1, &[1.0]).unwrap();
        let q = PredictionMatrix::new(Matrix::filled(1, 1, 0.2)).unwrap();
        let d = UncertaintyMatrix::new(Matrix::filled(1, 1, 0.3)).unwrap();
        assert!(PricingInstance::new(grid, q, d, RobustBudget::nominal(), vec![]).is_err());
        assert!(PriceGrid::uniform(1, &[0.0]).is_err());
        assert!(PriceGrid::uniform(1, &[]).is_err());
        assert!(PredictionMatrix::new(Matrix::filled(1, 1, 1.2)).is_err());
    }
}
