use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robust_pricing::experiment::{self, ExperimentConfig, ExperimentReport};
use robust_pricing::Result;

#[derive(Parser)]
#[command(
    name = "robust-pricing",
    version,
    about = "Robust personalized pricing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw or split the data and write train.csv and test.csv.
    Generate(Common),
    /// Train the base model and write model.json.
    Train(Common),
    /// Bootstrap the prediction uncertainty for every configured kappa.
    Uncertainty(Common),
    /// Solve every (alpha, kappa) cell and write the chosen prices.
    Solve(Common),
    /// Solve and score one seed; writes results.csv and timings.csv.
    Evaluate(Common),
    /// Run every configured seed and write the full output tree.
    Experiment(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's output_dir, then ".".
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seeds = vec![seed];
        }
        let out = self
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out)?;
        Ok((config, out))
    }
}

fn seed_dir(out: &Path, config: &ExperimentConfig, seed: u64) -> Result<PathBuf> {
    let dir = if config.seeds.len() == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("seed_{seed}"))
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(c) => {
            let (config, out) = c.load()?;
            for &seed in &config.seeds {
                let dir = seed_dir(&out, &config, seed)?;
                let data = experiment::prepare_data(&config, seed)?;
                data.train.save_csv(dir.join("train.csv"))?;
                data.test.save_csv(dir.join("test.csv"))?;
                println!(
                    "seed {seed}: {} train rows, {} test rows",
                    data.train.len(),
                    data.test.len()
                );
            }
        }
        Command::Train(c) => {
            let (config, out) = c.load()?;
            for &seed in &config.seeds {
                let dir = seed_dir(&out, &config, seed)?;
                let data = experiment::prepare_data(&config, seed)?;
                let model = experiment::train_base_model(&config, &data, seed)?;
                model.save(dir.join("model.json"))?;
                match experiment::test_auc(&model, &data.test)? {
                    Some(a) => println!(
                        "seed {seed}: {} stumps, test AUC {a:.4}",
                        model.stumps().len()
                    ),
                    None => println!(
                        "seed {seed}: {} stumps, test AUC undefined",
                        model.stumps().len()
                    ),
                }
            }
        }
        Command::Uncertainty(c) => {
            let (config, out) = c.load()?;
            for &seed in &config.seeds {
                let dir = seed_dir(&out, &config, seed)?;
                let data = experiment::prepare_data(&config, seed)?;
                let model = experiment::train_base_model(&config, &data, seed)?;
                model.save(dir.join("model.json"))?;
                let first = experiment::estimate(&config, &data, &model, seed)?;
                for &kappa in &config.kappas {
                    let est = first.with_kappa(kappa)?;
                    let file = File::create(dir.join(format!("uncertainty_kappa_{kappa}.csv")))?;
                    est.write_csv(BufWriter::new(file))?;
                }
                println!(
                    "seed {seed}: uncertainty written for {} kappa values",
                    config.kappas.len()
                );
            }
        }
        Command::Solve(c) => {
            let (config, out) = c.load()?;
            let report = experiment::run_experiment(&config)?;
            write_csv(
                &out.join("solutions.csv"),
                report.seeds.iter().flat_map(|s| &s.solutions),
            )?;
            write_csv(
                &out.join("timings.csv"),
                report.seeds.iter().flat_map(|s| &s.timings),
            )?;
            summarize(&report);
        }
        Command::Evaluate(c) => {
            let (config, out) = c.load()?;
            let report = experiment::run_experiment(&config)?;
            write_csv(&out.join("results.csv"), report.results())?;
            write_csv(
                &out.join("timings.csv"),
                report.seeds.iter().flat_map(|s| &s.timings),
            )?;
            summarize(&report);
        }
        Command::Experiment(c) => {
            let (config, out) = c.load()?;
            let report = experiment::run_experiment(&config)?;
            experiment::write_outputs(&report, &out)?;
            summarize(&report);
        }
    }
    Ok(())
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn summarize(report: &ExperimentReport) {
    for row in experiment::aggregate(report.results()) {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        println!(
            "alpha {:<5} kappa {:<5} {:<9} revenue {} (± {}) optimal {} n={}",
            row.alpha,
            row.kappa,
            row.solver,
            fmt(row.expected_revenue.mean),
            fmt(row.expected_revenue.stddev),
            fmt(row.optimal_revenue.mean),
            row.expected_revenue.n,
        );
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
