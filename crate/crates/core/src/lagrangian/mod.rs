//! Lagrangian decomposition heuristic for large instances.
//!
//! Side constraints are moved into the objective with multipliers `λ ≥ 0`.
//! For fixed `λ` and `nu` the relaxation splits into one small problem per
//! consumer; `nu` is chosen by golden-section search and `λ` follows projected
//! subgradient steps with step size `1 / (‖g‖ √t)`.

pub mod golden;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::best_nu_sweep;
use crate::model::{
    argmax, check_feasibility, worst_case_objective, Matrix, PriceAssignment, PricingInstance,
    SolveMethod, SolveReport,
};

pub use golden::{
    golden_section_search, golden_section_search_with_stats, GoldenSearch, GOLDEN_RATIO,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    pub eps_primal: f64,
    pub eps_golden: f64,
    pub max_iterations: usize,
    /// Recorded alongside results; the algorithm draws no random numbers.
    pub seed: u64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            eps_primal: 0.01,
            eps_golden: 0.01,
            max_iterations: 1000,
            seed: 0,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_primal > 0.0) {
            return Err(Error::config("eps_primal must be positive"));
        }
        if !(self.eps_golden > 0.0) {
            return Err(Error::config("eps_golden must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianState {
    pub lambda: Vec<f64>,
    pub step: f64,
    pub iteration: usize,
    pub rho: f64,
    /// `-f_k(z)` for each constraint.
    pub subgradient: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubproblemSolution {
    pub candidate: usize,
    pub mu: f64,
    pub value: f64,
}

/// One row of the optional convergence trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub nu: f64,
    pub rho: f64,
    pub subgradient_norm: f64,
    pub feasible: bool,
}

/// Writes the trace with columns `t, nu, rho, subgradient_norm, feasible`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Best candidate for consumer `i` at fixed `nu` and `λ`.
///
/// The returned value includes the consumer's share `Γ nu / |I|` of the
/// budget term.
pub fn consumer_subproblem(
    i: usize,
    nu: f64,
    lambda: &[f64],
    instance: &PricingInstance,
) -> Result<SubproblemSolution> {
    if i >= instance.n_consumers() {
        return Err(Error::input(format!(
            "consumer {i} out of range for {} consumers",
            instance.n_consumers()
        )));
    }
    if lambda.len() != instance.constraints().len() {
        return Err(Error::input(format!(
            "{} multipliers for {} constraints",
            lambda.len(),
            instance.constraints().len()
        )));
    }
    if !(nu >= 0.0) || lambda.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::input("nu and multipliers must be non-negative"));
    }
    let score = |j: usize| {
        let mu = (instance.loss(i, j) - nu).max(0.0);
        let penalty: f64 = instance
            .constraints()
            .iter()
            .zip(lambda)
            .map(|(c, l)| l * c.coefficients.get(i, j))
            .sum();
        (instance.revenue(i, j) - mu - penalty, mu)
    };
    let candidate = argmax((0..instance.n_candidates()).map(|j| score(j).0));
    let (value, mu) = score(candidate);
    let share = instance.gamma() * nu / instance.n_consumers() as f64;
    Ok(SubproblemSolution {
        candidate,
        mu,
        value: value - share,
    })
}

/// Projected subgradient step `max(λ + δ f, 0)`.
pub fn update_multipliers(state: &LagrangianState, f_values: &[f64]) -> Vec<f64> {
    state
        .lambda
        .iter()
        .zip(f_values)
        .map(|(l, f)| (l + state.step * f).max(0.0))
        .collect()
}

/// The relaxation at fixed `λ`, with penalties folded into the revenues.
struct Relaxation<'a> {
    adjusted: Matrix,
    loss: &'a Matrix,
    gamma: f64,
    /// `sum_k λ_k b_k`
    offset: f64,
}

impl<'a> Relaxation<'a> {
    fn new(instance: &PricingInstance, revenue: &Matrix, loss: &'a Matrix, lambda: &[f64]) -> Self {
        let mut adjusted = revenue.clone();
        let mut offset = 0.0;
        for (c, &l) in instance.constraints().iter().zip(lambda) {
            if l == 0.0 {
                continue;
            }
            adjusted = adjusted
                .zip_map(&c.coefficients, |r, a| r - l * a)
                .expect("shapes agree");
            offset += l * c.bound;
        }
        Relaxation {
            adjusted,
            loss,
            gamma: instance.gamma(),
            offset,
        }
    }

    fn cell(&self, i: usize, j: usize, nu: f64) -> f64 {
        self.adjusted.get(i, j) - (self.loss.get(i, j) - nu).max(0.0)
    }

    /// `ρ` with the per-consumer subproblems solved optimally.
    fn value(&self, nu: f64) -> f64 {
        let (rows, cols) = self.adjusted.shape();
        let total: f64 = (0..rows)
            .map(|i| {
                (0..cols)
                    .map(|j| self.cell(i, j, nu))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum();
        total - self.gamma * nu + self.offset
    }

    fn assignment(&self, nu: f64) -> PriceAssignment {
        let (rows, cols) = self.adjusted.shape();
        PriceAssignment::new(
            (0..rows)
                .map(|i| argmax((0..cols).map(|j| self.cell(i, j, nu))))
                .collect(),
        )
    }

    /// Maximum over every `nu`, an upper bound on the robust optimum.
    fn bound(&self) -> f64 {
        best_nu_sweep(&self.adjusted, self.loss, self.gamma).1 + self.offset
    }
}

/// Golden-section search for `nu` on `[0, max loss]`.
///
/// With `Γ = 0` the relaxation is nondecreasing in `nu`, so the upper end is
/// taken directly. Otherwise the search result is compared with both
/// interval ends and replaced only on strict improvement.
fn choose_nu(relax: &Relaxation<'_>, upper: f64, eps: f64) -> f64 {
    if relax.gamma == 0.0 {
        return upper;
    }
    let nu = golden_section_search(|v| relax.value(v), 0.0, upper, eps);
    let mut best = (nu, relax.value(nu));
    for end in [upper, 0.0] {
        let v = relax.value(end);
        if v > best.1 {
            best = (end, v);
        }
    }
    best.0
}

pub fn heuristic_solve(
    instance: &PricingInstance,
    config: &HeuristicConfig,
) -> Result<SolveReport> {
    heuristic_solve_traced(instance, config).map(|(report, _)| report)
}

/// Runs the heuristic and also returns one trace row per iteration.
pub fn heuristic_solve_traced(
    instance: &PricingInstance,
    config: &HeuristicConfig,
) -> Result<(SolveReport, Vec<TraceRow>)> {
    config.validate()?;
    let start = Instant::now();
    let grid = instance.grid().matrix();
    let revenue = grid.zip_map(instance.predictions().matrix(), |p, q| p * q)?;
    let loss = grid.zip_map(instance.uncertainty().matrix(), |p, d| p * d)?;
    let upper = instance.max_loss();

    let mut state = LagrangianState {
        lambda: vec![0.0; instance.constraints().len()],
        step: 0.0,
        iteration: 1,
        rho: f64::NAN,
        subgradient: Vec::new(),
    };
    let mut bound = Relaxation::new(instance, &revenue, &loss, &state.lambda).bound();
    let mut trace = Vec::new();
    // (worst-case value, assignment, multipliers)
    let mut best: Option<(f64, PriceAssignment, Vec<f64>)> = None;
    let last = loop {
        let t = state.iteration;
        let relax = Relaxation::new(instance, &revenue, &loss, &state.lambda);
        let nu = choose_nu(&relax, upper, config.eps_golden);
        let z = relax.assignment(nu);
        state.rho = relax.value(nu);
        let (feasible, f) = check_feasibility(&z, instance.constraints())?;
        state.subgradient = f.iter().map(|v| -v).collect();
        let norm = state.subgradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        trace.push(TraceRow {
            t,
            nu,
            rho: state.rho,
            subgradient_norm: norm,
            feasible,
        });

        if feasible {
            let (wc, _) = worst_case_objective(&z, instance)?;
            if best.as_ref().is_none_or(|b| wc > b.0) {
                best = Some((wc, z.clone(), state.lambda.clone()));
            }
        }
        let done =
            (feasible && (norm / t as f64) < config.eps_primal) || t >= config.max_iterations;
        if done {
            if t > 1 {
                bound = bound.min(relax.bound());
            }
            break (z, state.lambda.clone());
        }
        state.step = 1.0 / (norm * (t as f64).sqrt());
        state.lambda = update_multipliers(&state, &f);
        state.iteration += 1;
    };

    let iterations = state.iteration;
    let (assignment, lambda) = match best {
        Some((_, z, lambda)) => (z, lambda),
        None => last,
    };
    let mut report = SolveReport::evaluate(instance, assignment, SolveMethod::Heuristic)?;
    if !lambda.is_empty() {
        report.multipliers = Some(lambda);
    }
    report.upper_bound = Some(bound);
    report.iterations = iterations;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((report, trace))
}
