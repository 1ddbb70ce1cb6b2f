use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentReport, ResultRow};
use crate::error::Result;
use crate::lagrangian::write_trace_csv;

/// Mean and sample standard deviation over the seeds that produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Stat {
                n,
                mean: None,
                stddev: None,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let stddev = (n > 1).then(|| {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Stat {
            n,
            mean: Some(mean),
            stddev,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub alpha: f64,
    pub kappa: f64,
    pub solver: String,
    pub objective: Stat,
    pub expected_revenue: Stat,
    pub simulated_revenue: Stat,
    pub optimal_revenue: Stat,
    pub no_change_revenue: Stat,
    pub test_auc: Stat,
}

type GroupKey = (String, f64, f64, String);

/// Groups rows by `(dataset, α, κ, solver)` in order of first appearance.
pub fn aggregate<'a>(rows: impl IntoIterator<Item = &'a ResultRow>) -> Vec<AggregateRow> {
    let mut groups: Vec<(GroupKey, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let key = (r.dataset.clone(), r.alpha, r.kappa, r.solver.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((dataset, alpha, kappa, solver), m)| AggregateRow {
            dataset,
            alpha,
            kappa,
            solver,
            objective: Stat::of(m.iter().filter_map(|r| r.objective)),
            expected_revenue: Stat::of(m.iter().filter_map(|r| r.expected_revenue)),
            simulated_revenue: Stat::of(m.iter().filter_map(|r| r.simulated_revenue)),
            optimal_revenue: Stat::of(m.iter().map(|r| r.optimal_revenue)),
            no_change_revenue: Stat::of(m.iter().map(|r| r.no_change_revenue)),
            test_auc: Stat::of(m.iter().filter_map(|r| r.test_auc)),
        })
        .collect()
}

/// One point of a revenue-versus-α series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub alpha: f64,
    pub robust_mean: Option<f64>,
    pub robust_stddev: Option<f64>,
    pub optimal_mean: Option<f64>,
    pub no_change_mean: Option<f64>,
}

/// Series keyed by `(κ, solver)`, each ordered by α as configured.
pub fn plot_series(aggregates: &[AggregateRow]) -> Vec<((f64, String), Vec<PlotRow>)> {
    let mut series: Vec<((f64, String), Vec<PlotRow>)> = Vec::new();
    for a in aggregates {
        let key = (a.kappa, a.solver.clone());
        let row = PlotRow {
            alpha: a.alpha,
            robust_mean: a.expected_revenue.mean,
            robust_stddev: a.expected_revenue.stddev,
            optimal_mean: a.optimal_revenue.mean,
            no_change_mean: a.no_change_revenue.mean,
        };
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(row),
            None => series.push((key, vec![row])),
        }
    }
    series
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the full output tree under `dir`:
///
/// ```text
/// results.csv  timings.csv  solutions.csv  aggregate.json
/// plotdata/revenue_kappa_<κ>_<solver>.csv
/// seed_<s>/model.json  seed_<s>/uncertainty_kappa_<κ>.csv
/// seed_<s>/trace_alpha_<α>_kappa_<κ>.csv   (when traces are enabled)
/// ```
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("plotdata"))?;
    write_rows(&dir.join("results.csv"), report.results())?;
    write_rows(
        &dir.join("timings.csv"),
        report.seeds.iter().flat_map(|s| &s.timings),
    )?;
    write_rows(
        &dir.join("solutions.csv"),
        report.seeds.iter().flat_map(|s| &s.solutions),
    )?;
    let aggregates = aggregate(report.results());
    std::fs::write(
        dir.join("aggregate.json"),
        serde_json::to_string_pretty(&aggregates)? + "\n",
    )?;
    for ((kappa, solver), rows) in plot_series(&aggregates) {
        write_rows(
            &dir.join("plotdata")
                .join(format!("revenue_kappa_{kappa}_{solver}.csv")),
            rows,
        )?;
    }
    for seed in &report.seeds {
        let seed_dir = dir.join(format!("seed_{}", seed.seed));
        std::fs::create_dir_all(&seed_dir)?;
        seed.model.save(seed_dir.join("model.json"))?;
        for est in &seed.estimates {
            let file = File::create(seed_dir.join(format!("uncertainty_kappa_{}.csv", est.kappa)))?;
            est.write_csv(BufWriter::new(file))?;
        }
        for trace in &seed.traces {
            let name = format!("trace_alpha_{}_kappa_{}.csv", trace.alpha, trace.kappa);
            write_trace_csv(
                &trace.rows,
                BufWriter::new(File::create(seed_dir.join(name))?),
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_statistics() {
        let s = Stat::of([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.n, 4);
        assert_eq!(s.mean, Some(2.5));
        assert!((s.stddev.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of([7.0]).stddev, None);
        assert_eq!(Stat::of([]).mean, None);
    }
}
