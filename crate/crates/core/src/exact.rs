//! Exact solution of the robust pricing problem without a MILP solver.
//!
//! For fixed `nu` the dual reformulation decomposes by consumer: picking
//! candidate `j` for consumer `i` is worth
//!
//! ```text
//! v_ij(nu) = P_ij q̂_ij - max(0, P_ij Δ_ij - nu)
//! ```
//!
//! and the objective is `sum_i v_{i,j(i)}(nu) - Gamma * nu`. For any fixed
//! assignment that objective is concave and piecewise linear in `nu` with
//! kinks only at the chosen `P_ij Δ_ij`, so an optimal `nu` lies in
//! `{0} ∪ {P_ij Δ_ij}`. Trying every candidate `nu` therefore finds the
//! global optimum.
//!
//! Without side constraints the candidates are visited by a single sorted
//! sweep ([`best_nu_sweep`]). A single 0/1 knapsack constraint is handled by a
//! dynamic program over consumers for each candidate `nu`. Anything else is
//! left to exhaustive enumeration when the instance is small enough.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    argmax, check_feasibility, dual_value, worst_case_objective, LinearConstraint, Matrix,
    PriceAssignment, PricingInstance, SolveMethod, SolveReport,
};

/// Largest search space (`|J|^|I|`) the brute-force oracle accepts.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactMode {
    #[default]
    Auto,
    Breakpoint,
    KnapsackDp,
    BruteForce,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactConfig {
    /// Seconds.
    pub time_limit: f64,
    pub mode: ExactMode,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            time_limit: 300.0,
            mode: ExactMode::Auto,
        }
    }
}

impl ExactConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit > 0.0) {
            return Err(Error::config("time_limit must be positive"));
        }
        Ok(())
    }
}

struct Deadline {
    start: Instant,
    limit: f64,
}

impl Deadline {
    fn new(limit: f64) -> Self {
        Deadline {
            start: Instant::now(),
            limit,
        }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn expired(&self) -> bool {
        self.elapsed() > self.limit
    }
}

pub fn solve_exact(instance: &PricingInstance, config: &ExactConfig) -> Result<SolveReport> {
    config.validate()?;
    let deadline = Deadline::new(config.time_limit);
    let constraints = instance.constraints();
    let knapsack_ok = constraints.len() == 1 && constraints[0].is_binary();
    let mode = match config.mode {
        ExactMode::Auto if constraints.is_empty() => ExactMode::Breakpoint,
        ExactMode::Auto if knapsack_ok => ExactMode::KnapsackDp,
        ExactMode::Auto => ExactMode::BruteForce,
        m => m,
    };
    let mut report = match mode {
        ExactMode::Breakpoint => {
            if !constraints.is_empty() {
                return Err(Error::Capability(
                    "breakpoint mode solves unconstrained instances only".into(),
                ));
            }
            solve_breakpoint(instance)?
        }
        ExactMode::KnapsackDp => {
            if !knapsack_ok {
                return Err(Error::Capability(
                    "knapsack_dp needs exactly one constraint with 0/1 coefficients".into(),
                ));
            }
            solve_knapsack(instance, &constraints[0], &deadline)?
        }
        ExactMode::BruteForce | ExactMode::Auto => brute_force(instance, &deadline)?,
    };
    report.wall_time = deadline.elapsed();
    Ok(report)
}

/// Enumerates every assignment; the verification oracle for [`solve_exact`].
pub fn brute_force_oracle(instance: &PricingInstance) -> Result<SolveReport> {
    let deadline = Deadline::new(f64::INFINITY);
    let mut report = brute_force(instance, &deadline)?;
    report.wall_time = deadline.elapsed();
    Ok(report)
}

/// `{0} ∪ {P_ij Δ_ij}`, ascending and deduplicated. With `Gamma = 0` the
/// objective is non-decreasing in `nu`, so only the largest loss is kept
/// (there every penalty vanishes).
fn nu_candidates(instance: &PricingInstance) -> Vec<f64> {
    if instance.gamma() == 0.0 {
        return vec![instance.max_loss()];
    }
    let mut nus: Vec<f64> = std::iter::once(0.0)
        .chain(
            (0..instance.n_consumers())
                .flat_map(|i| (0..instance.n_candidates()).map(move |j| instance.loss(i, j))),
        )
        .collect();
    nus.sort_by(f64::total_cmp);
    nus.dedup();
    nus
}

/// Value `v_ij(nu)` of each candidate for consumer `i`.
#[inline]
fn candidate_value(revenue: &Matrix, loss: &Matrix, i: usize, j: usize, nu: f64) -> f64 {
    revenue.get(i, j) - (loss.get(i, j) - nu).max(0.0)
}

fn revenue_and_loss(instance: &PricingInstance) -> (Matrix, Matrix) {
    let grid = instance.grid().matrix();
    let revenue = grid
        .zip_map(instance.predictions().matrix(), |p, q| p * q)
        .expect("instance shapes agree");
    let loss = grid
        .zip_map(instance.uncertainty().matrix(), |p, d| p * d)
        .expect("instance shapes agree");
    (revenue, loss)
}

/// Per-consumer argmax of `v_ij(nu)`, ties to the lower index.
pub(crate) fn assignment_at(revenue: &Matrix, loss: &Matrix, nu: f64) -> PriceAssignment {
    let choices = (0..revenue.rows())
        .map(|i| argmax((0..revenue.cols()).map(|j| candidate_value(revenue, loss, i, j, nu))))
        .collect();
    PriceAssignment::new(choices)
}

/// `sum_i max_j v_ij(nu) - Gamma * nu`, evaluated directly.
#[cfg(test)]
pub(crate) fn fixed_nu_value(revenue: &Matrix, loss: &Matrix, gamma: f64, nu: f64) -> f64 {
    let total: f64 = (0..revenue.rows())
        .map(|i| {
            (0..revenue.cols())
                .map(|j| candidate_value(revenue, loss, i, j, nu))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    total - gamma * nu
}

/// Best `nu` over `{0} ∪ {loss_ij}` and its objective, found by one sorted sweep.
///
/// Consumer `i` contributes `max(A_i, nu + B_i)` where `A_i` is the best
/// revenue among candidates whose loss is already `<= nu` and `B_i` the best
/// `revenue - loss` among the rest. Both change only when `nu` passes a loss,
/// and the regime flips from `A_i` to the sloped branch once `nu` passes
/// `A_i - B_i`; those crossings sit in a heap. Smallest `nu` wins ties.
pub(crate) fn best_nu_sweep(revenue: &Matrix, loss: &Matrix, gamma: f64) -> (f64, f64) {
    let (rows, cols) = revenue.shape();
    if rows == 0 {
        return (0.0, 0.0);
    }
    let mut events: Vec<(f64, usize, usize)> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (loss.get(i, j), i, j)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    #[derive(Clone, Copy)]
    struct State {
        settled: f64,
        active: f64,
        sloped: bool,
        version: u32,
    }
    let mut settled_mask = vec![false; rows * cols];
    let best_active = |i: usize, mask: &[bool]| {
        (0..cols)
            .filter(|&j| !mask[i * cols + j])
            .map(|j| revenue.get(i, j) - loss.get(i, j))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut states: Vec<State> = (0..rows)
        .map(|i| State {
            settled: f64::NEG_INFINITY,
            active: best_active(i, &settled_mask),
            sloped: true,
            version: 0,
        })
        .collect();
    let mut flat_sum = 0.0;
    let mut slope_sum: f64 = states.iter().map(|s| s.active).sum();
    let mut n_sloped = rows as f64;
    // (threshold, consumer, version), min-heap by threshold
    let mut crossings: BinaryHeap<Reverse<(OrdF64, usize, u32)>> = BinaryHeap::new();

    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let mut next_event = 0;
    let candidates = std::iter::once(0.0).chain(events.iter().map(|e| e.0));
    let mut last_nu = f64::NEG_INFINITY;
    for nu in candidates {
        if nu == last_nu {
            continue;
        }
        last_nu = nu;
        while next_event < events.len() && events[next_event].0 <= nu {
            let (_, i, j) = events[next_event];
            next_event += 1;
            settled_mask[i * cols + j] = true;
            let s = &mut states[i];
            if s.sloped {
                slope_sum -= s.active;
                n_sloped -= 1.0;
            } else {
                flat_sum -= s.settled;
            }
            s.settled = s.settled.max(revenue.get(i, j));
            s.active = best_active(i, &settled_mask);
            s.version += 1;
            s.sloped = s.active.is_finite() && nu + s.active > s.settled;
            if s.sloped {
                slope_sum += s.active;
                n_sloped += 1.0;
            } else {
                flat_sum += s.settled;
                if s.active.is_finite() {
                    crossings.push(Reverse((OrdF64(s.settled - s.active), i, s.version)));
                }
            }
        }
        while let Some(&Reverse((OrdF64(threshold), i, version))) = crossings.peek() {
            if threshold > nu {
                break;
            }
            crossings.pop();
            let s = &mut states[i];
            if s.version != version || s.sloped {
                continue;
            }
            flat_sum -= s.settled;
            slope_sum += s.active;
            n_sloped += 1.0;
            s.sloped = true;
        }
        let value = flat_sum + slope_sum + nu * n_sloped - gamma * nu;
        if value > best.1 {
            best = (nu, value);
        }
    }
    best
}

#[derive(Clone, Copy)]
struct OrdF64(f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn finish(
    instance: &PricingInstance,
    assignment: PriceAssignment,
    nu: f64,
    iterations: usize,
    method: SolveMethod,
) -> Result<SolveReport> {
    let mut report = SolveReport::evaluate(instance, assignment, method)?;
    let (_, cert) = dual_value(&report.assignment, instance, nu)?;
    report.dual = Some(cert);
    report.iterations = iterations;
    Ok(report)
}

fn solve_breakpoint(instance: &PricingInstance) -> Result<SolveReport> {
    let (revenue, loss) = revenue_and_loss(instance);
    let nu = if instance.gamma() == 0.0 {
        instance.max_loss()
    } else {
        best_nu_sweep(&revenue, &loss, instance.gamma()).0
    };
    let assignment = assignment_at(&revenue, &loss, nu);
    let evaluated = nu_candidates(instance).len();
    finish(instance, assignment, nu, evaluated, SolveMethod::Breakpoint)
}

/// Per-consumer best candidate inside and outside the constrained class.
struct Classes {
    free: Vec<(f64, usize)>,
    flagged: Vec<(f64, usize)>,
}

fn split_classes(revenue: &Matrix, loss: &Matrix, flags: &Matrix, nu: f64, classes: &mut Classes) {
    classes.free.clear();
    classes.flagged.clear();
    for i in 0..revenue.rows() {
        let mut free = (f64::NEG_INFINITY, usize::MAX);
        let mut flagged = (f64::NEG_INFINITY, usize::MAX);
        for j in 0..revenue.cols() {
            let v = candidate_value(revenue, loss, i, j, nu);
            let slot = if flags.get(i, j) == 1.0 {
                &mut flagged
            } else {
                &mut free
            };
            if v > slot.0 {
                *slot = (v, j);
            }
        }
        classes.free.push(free);
        classes.flagged.push(flagged);
    }
}

/// Knapsack DP over consumers: at most `capacity` flagged picks.
/// Returns the best total, or `-inf` when no pick pattern fits.
/// With `take` supplied, records each consumer's decision per capacity.
fn knapsack_value(
    classes: &Classes,
    capacity: usize,
    dp: &mut Vec<f64>,
    mut take: Option<&mut Vec<bool>>,
) -> f64 {
    dp.clear();
    dp.resize(capacity + 1, 0.0);
    let width = capacity + 1;
    if let Some(t) = take.as_deref_mut() {
        t.clear();
        t.resize(classes.free.len() * width, false);
    }
    let mut offset = 0.0;
    for (i, (&(b0, _), &(b1, _))) in classes.free.iter().zip(&classes.flagged).enumerate() {
        if b1 <= b0 {
            // dp is non-decreasing in capacity, so the flagged pick never helps
            offset += b0;
            continue;
        }
        for c in (0..=capacity).rev() {
            let keep = dp[c] + b0;
            let flag = if c > 0 {
                dp[c - 1] + b1
            } else {
                f64::NEG_INFINITY
            };
            if flag > keep {
                dp[c] = flag;
                if let Some(t) = take.as_deref_mut() {
                    t[i * width + c] = true;
                }
            } else {
                dp[c] = keep;
            }
        }
    }
    dp[capacity] + offset
}

fn solve_knapsack(
    instance: &PricingInstance,
    constraint: &LinearConstraint,
    deadline: &Deadline,
) -> Result<SolveReport> {
    let (revenue, loss) = revenue_and_loss(instance);
    let flags = &constraint.coefficients;
    let n = instance.n_consumers();
    let bound = constraint.bound.floor();
    // coefficients are non-negative, so a negative bound admits nothing
    if bound < 0.0 {
        return Err(Error::Infeasible);
    }
    let capacity = (bound as usize).min(n);
    let gamma = instance.gamma();

    let mut classes = Classes {
        free: Vec::with_capacity(n),
        flagged: Vec::with_capacity(n),
    };
    let mut dp = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let candidates = nu_candidates(instance);
    let mut evaluated = 0;
    for &nu in &candidates {
        if deadline.expired() {
            let incumbent = best
                .map(|(nu, _)| {
                    reconstruct(instance, &revenue, &loss, flags, capacity, nu, evaluated)
                })
                .transpose()?
                .map(Box::new);
            return Err(Error::Timeout {
                limit_secs: deadline.limit,
                incumbent,
            });
        }
        evaluated += 1;
        split_classes(&revenue, &loss, flags, nu, &mut classes);
        let value = knapsack_value(&classes, capacity, &mut dp, None) - gamma * nu;
        if value.is_finite() && best.is_none_or(|(_, b)| value > b) {
            best = Some((nu, value));
        }
    }
    let (nu, _) = best.ok_or(Error::Infeasible)?;
    reconstruct(instance, &revenue, &loss, flags, capacity, nu, evaluated)
}

fn reconstruct(
    instance: &PricingInstance,
    revenue: &Matrix,
    loss: &Matrix,
    flags: &Matrix,
    capacity: usize,
    nu: f64,
    evaluated: usize,
) -> Result<SolveReport> {
    let n = revenue.rows();
    let mut classes = Classes {
        free: Vec::with_capacity(n),
        flagged: Vec::with_capacity(n),
    };
    split_classes(revenue, loss, flags, nu, &mut classes);
    let mut dp = Vec::new();
    let mut take = Vec::new();
    knapsack_value(&classes, capacity, &mut dp, Some(&mut take));
    let width = capacity + 1;
    let mut c = capacity;
    let mut choices = vec![0; n];
    for i in (0..n).rev() {
        if take[i * width + c] {
            choices[i] = classes.flagged[i].1;
            c -= 1;
        } else {
            choices[i] = classes.free[i].1;
        }
    }
    finish(
        instance,
        PriceAssignment::new(choices),
        nu,
        evaluated,
        SolveMethod::KnapsackDp,
    )
}

fn brute_force(instance: &PricingInstance, deadline: &Deadline) -> Result<SolveReport> {
    let n = instance.n_consumers();
    let m = instance.n_candidates();
    let space = (m as u64)
        .checked_pow(n as u32)
        .filter(|&s| s <= BRUTE_FORCE_LIMIT);
    let Some(space) = space else {
        return Err(Error::Capability(format!(
            "{m}^{n} assignments exceed the brute-force limit of {BRUTE_FORCE_LIMIT}"
        )));
    };

    let mut choices = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for step in 0..space {
        if step % 4096 == 0 && deadline.expired() {
            let incumbent = best
                .map(|(_, c)| brute_report(instance, PriceAssignment::new(c), step as usize))
                .transpose()?
                .map(Box::new);
            return Err(Error::Timeout {
                limit_secs: deadline.limit,
                incumbent,
            });
        }
        let z = PriceAssignment::new(choices.clone());
        if check_feasibility(&z, instance.constraints())?.0 {
            let (value, _) = worst_case_objective(&z, instance)?;
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, choices.clone()));
            }
        }
        // odometer, last consumer fastest
        for slot in choices.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    let (_, choices) = best.ok_or(Error::Infeasible)?;
    brute_report(instance, PriceAssignment::new(choices), space as usize)
}

/// Report with the dual certificate at the best breakpoint of the chosen assignment.
fn brute_report(
    instance: &PricingInstance,
    assignment: PriceAssignment,
    iterations: usize,
) -> Result<SolveReport> {
    let mut best_nu = 0.0;
    let mut best_value = f64::NEG_INFINITY;
    let breakpoints = std::iter::once(0.0).chain(
        assignment
            .choices()
            .iter()
            .enumerate()
            .map(|(i, &j)| instance.loss(i, j)),
    );
    for nu in breakpoints {
        let (v, _) = dual_value(&assignment, instance, nu)?;
        if v > best_value {
            best_value = v;
            best_nu = nu;
        }
    }
    finish(
        instance,
        assignment,
        best_nu,
        iterations,
        SolveMethod::BruteForce,
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{
        nominal_argmax, PredictionMatrix, PriceGrid, RobustBudget, UncertaintyMatrix,
    };
    use rand::{Rng, SeedableRng};

    fn one_consumer(delta: [f64; 2], gamma: f64) -> PricingInstance {
        PricingInstance::new(
            PriceGrid::uniform(1, &[10.0, 8.0]).unwrap(),
            PredictionMatrix::new(Matrix::new(1, 2, vec![0.5, 0.9]).unwrap()).unwrap(),
            UncertaintyMatrix::new(Matrix::new(1, 2, delta.to_vec()).unwrap()).unwrap(),
            RobustBudget::absolute(gamma, 1.0, 1).unwrap(),
            vec![],
        )
        .unwrap()
    }

    pub(crate) fn random_instance(
        rng: &mut impl Rng,
        n: usize,
        m: usize,
        gamma: f64,
    ) -> PricingInstance {
        let prices: Vec<f64> = (0..n * m).map(|_| rng.random_range(1.0..10.0)).collect();
        let qhat: Vec<f64> = (0..n * m).map(|_| rng.random_range(0.0..1.0)).collect();
        let delta: Vec<f64> = qhat
            .iter()
            .map(|&q| q * rng.random_range(0.0..1.0))
            .collect();
        PricingInstance::new(
            PriceGrid::new(Matrix::new(n, m, prices).unwrap()).unwrap(),
            PredictionMatrix::new(Matrix::new(n, m, qhat).unwrap()).unwrap(),
            UncertaintyMatrix::new(Matrix::new(n, m, delta).unwrap()).unwrap(),
            RobustBudget::absolute(gamma, 1.0, n).unwrap(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn zero_budget_is_nominal() {
        let r = solve_exact(&one_consumer([0.4, 0.1], 0.0), &ExactConfig::default()).unwrap();
        assert_eq!(r.assignment.choices(), &[1]);
        assert!((r.worst_case_value - 7.2).abs() < 1e-12);
    }

    #[test]
    fn two_case_enumeration() {
        // worst values: 10*(0.5-0.4) = 1.0 and 8*(0.9-0.1) = 6.4
        let r = solve_exact(&one_consumer([0.4, 0.1], 1.0), &ExactConfig::default()).unwrap();
        assert_eq!(r.assignment.choices(), &[1]);
        assert!((r.worst_case_value - 6.4).abs() < 1e-12);
        assert_eq!(r.method, SolveMethod::Breakpoint);
    }

    #[test]
    fn sweep_matches_direct_evaluation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let m = rng.random_range(1..5);
            let gamma = rng.random_range(0.0..n as f64);
            let inst = random_instance(&mut rng, n, m, gamma);
            let (revenue, loss) = revenue_and_loss(&inst);
            let direct = nu_candidates(&inst)
                .into_iter()
                .map(|nu| fixed_nu_value(&revenue, &loss, gamma, nu))
                .fold(f64::NEG_INFINITY, f64::max);
            let (nu, swept) = best_nu_sweep(&revenue, &loss, gamma);
            assert!((direct - swept).abs() < 1e-9, "{direct} vs {swept}");
            assert!((fixed_nu_value(&revenue, &loss, gamma, nu) - swept).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_handles_duplicate_and_zero_losses() {
        let revenue = Matrix::new(2, 2, vec![3.0, 2.0, 1.0, 4.0]).unwrap();
        let loss = Matrix::new(2, 2, vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        for gamma in [0.0, 0.5, 1.0, 2.0] {
            let direct = [0.0, 1.0]
                .iter()
                .map(|&nu| fixed_nu_value(&revenue, &loss, gamma, nu))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((best_nu_sweep(&revenue, &loss, gamma).1 - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_oracle_with_and_without_knapsack() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for case in 0..100 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=3);
            let gamma = [0.0, 1.0, 2.0, 2.5][case % 4];
            let mut inst = random_instance(&mut rng, n, m, gamma);
            if case % 2 == 1 {
                let flags: Vec<f64> = (0..n * m)
                    .map(|_| f64::from(rng.random_range(0..2u8)))
                    .collect();
                let bound = f64::from(rng.random_range(0..=n as u32));
                inst = inst
                    .with_constraints(vec![LinearConstraint::new(
                        Matrix::new(n, m, flags).unwrap(),
                        bound,
                    )])
                    .unwrap();
            }
            let oracle = brute_force_oracle(&inst);
            let exact = solve_exact(&inst, &ExactConfig::default());
            match (oracle, exact) {
                (Ok(o), Ok(e)) => {
                    assert!(
                        (o.worst_case_value - e.worst_case_value).abs() < 1e-9,
                        "case {case}"
                    );
                    assert!(e.feasible);
                }
                (Err(Error::Infeasible), Err(Error::Infeasible)) => {}
                (o, e) => panic!("case {case}: oracle {o:?} vs exact {e:?}"),
            }
        }
    }

    #[test]
    fn dual_certificate_reproduces_value() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let inst = random_instance(&mut rng, 6, 3, 2.5);
            let r = solve_exact(&inst, &ExactConfig::default()).unwrap();
            let cert = r.dual.as_ref().unwrap();
            let (v, _) = dual_value(&r.assignment, &inst, cert.nu).unwrap();
            assert!((v - r.worst_case_value).abs() < 1e-9);
            // certificate feasibility: mu_i + nu >= c_i
            for (i, &j) in r.assignment.choices().iter().enumerate() {
                assert!(cert.mu[i] + cert.nu - inst.loss(i, j) >= -1e-12);
            }
        }
    }

    #[test]
    fn zero_gamma_equals_nominal_argmax() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let inst = random_instance(&mut rng, 20, 4, 0.0);
            let r = solve_exact(&inst, &ExactConfig::default()).unwrap();
            assert_eq!(r.assignment, nominal_argmax(&inst));
        }
    }

    #[test]
    fn routing_and_capability_errors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let inst = random_instance(&mut rng, 3, 2, 1.0);
        let c = LinearConstraint::new(
            Matrix::new(3, 2, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap(),
            1.0,
        );
        let general = LinearConstraint::new(Matrix::filled(3, 2, 0.5), 2.0);

        let with_one = inst.with_constraints(vec![c.clone()]).unwrap();
        let bp = ExactConfig {
            mode: ExactMode::Breakpoint,
            ..Default::default()
        };
        assert!(matches!(
            solve_exact(&with_one, &bp),
            Err(Error::Capability(_))
        ));
        assert_eq!(
            solve_exact(&with_one, &ExactConfig::default())
                .unwrap()
                .method,
            SolveMethod::KnapsackDp
        );

        let with_two = inst.with_constraints(vec![c, general.clone()]).unwrap();
        assert_eq!(
            solve_exact(&with_two, &ExactConfig::default())
                .unwrap()
                .method,
            SolveMethod::BruteForce
        );
        let dp = ExactConfig {
            mode: ExactMode::KnapsackDp,
            ..Default::default()
        };
        assert!(matches!(
            solve_exact(&with_two, &dp),
            Err(Error::Capability(_))
        ));

        let big =
            random_instance(&mut rng, 30, 3, 1.0).with_constraints(vec![LinearConstraint::new(
                Matrix::filled(30, 3, 0.5),
                10.0,
            )]);
        assert!(matches!(
            solve_exact(&big.unwrap(), &ExactConfig::default()),
            Err(Error::Capability(_))
        ));
        assert!(ExactConfig {
            time_limit: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn oracle_trivial_and_infeasible() {
        let inst = PricingInstance::new(
            PriceGrid::uniform(1, &[2.0]).unwrap(),
            PredictionMatrix::new(Matrix::filled(1, 1, 0.5)).unwrap(),
            UncertaintyMatrix::zeros(1, 1),
            RobustBudget::nominal(),
            vec![],
        )
        .unwrap();
        let r = brute_force_oracle(&inst).unwrap();
        assert_eq!(r.assignment.choices(), &[0]);
        assert_eq!(r.worst_case_value, 1.0);

        let impossible = inst
            .with_constraints(vec![LinearConstraint::new(Matrix::filled(1, 1, 1.0), 0.0)])
            .unwrap();
        assert!(matches!(
            brute_force_oracle(&impossible),
            Err(Error::Infeasible)
        ));
        assert!(matches!(
            solve_exact(&impossible, &ExactConfig::default()),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn tiny_time_limit_times_out_with_incumbent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let inst = random_instance(&mut rng, 400, 9, 200.0)
            .with_constraints(vec![LinearConstraint::price_change_limit(
                &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
                0.1,
                400,
            )])
            .unwrap();
        let config = ExactConfig {
            time_limit: 1e-9,
            ..Default::default()
        };
        match solve_exact(&inst, &config) {
            Err(Error::Timeout { incumbent, .. }) => {
                // the deadline may fire before the first candidate is scored
                if let Some(r) = incumbent {
                    assert!(r.feasible);
                }
            }
            other => panic!("expected timeout, got {other:?}"),
        }
    }
}
