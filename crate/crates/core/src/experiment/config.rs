use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactConfig;
use crate::ingestion::TransactionSchema;
use crate::lagrangian::HeuristicConfig;
use crate::predictor::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        dataset_id: u8,
        n_train: usize,
        n_test: usize,
    },
    /// A flat transaction file, split in half into training and test rows.
    Csv {
        path: PathBuf,
        schema: TransactionSchema,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    #[default]
    Exact,
    Heuristic,
    Both,
}

impl SolverChoice {
    pub fn runs_exact(self) -> bool {
        matches!(self, SolverChoice::Exact | SolverChoice::Both)
    }

    pub fn runs_heuristic(self) -> bool {
        matches!(self, SolverChoice::Heuristic | SolverChoice::Both)
    }
}

/// At most `beta * |I|` consumers may receive a candidate with `mask = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceChangeSpec {
    pub mask: Vec<f64>,
    pub beta: f64,
}

fn default_n_bootstrap() -> usize {
    20
}

fn default_alphas() -> Vec<f64> {
    vec![0.5]
}

fn default_kappas() -> Vec<f64> {
    vec![1.0]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DataSource,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_n_bootstrap")]
    pub n_bootstrap: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default)]
    pub exact: ExactConfig,
    #[serde(default)]
    pub heuristic: HeuristicConfig,
    #[serde(default)]
    pub price_change: Option<PriceChangeSpec>,
    /// Bernoulli replications per evaluation; 0 keeps expected values only.
    #[serde(default)]
    pub replications: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Write a heuristic convergence trace per cell.
    #[serde(default)]
    pub write_traces: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A synthetic run with every other setting at its default.
    pub fn synthetic(dataset_id: u8, n_train: usize, n_test: usize) -> Self {
        ExperimentConfig {
            source: DataSource::Synthetic {
                dataset_id,
                n_train,
                n_test,
            },
            train: TrainConfig::default(),
            n_bootstrap: default_n_bootstrap(),
            alphas: default_alphas(),
            kappas: default_kappas(),
            solver: SolverChoice::default(),
            exact: ExactConfig::default(),
            heuristic: HeuristicConfig::default(),
            price_change: None,
            replications: 0,
            seeds: default_seeds(),
            write_traces: false,
            output_dir: None,
        }
    }

    /// Parses a JSON config. A relative CSV path is resolved against the
    /// directory holding the config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if let DataSource::Csv { path: data, .. } = &mut config.source {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.source {
            DataSource::Synthetic {
                dataset_id,
                n_train,
                n_test,
            } => {
                if !(1..=6).contains(dataset_id) {
                    return Err(Error::config(format!(
                        "dataset_id {dataset_id} is not in 1..=6"
                    )));
                }
                if *n_train == 0 || *n_test == 0 {
                    return Err(Error::config("n_train and n_test must be at least 1"));
                }
            }
            DataSource::Csv { schema, .. } => schema.validate()?,
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::config("alphas must be a non-empty list in [0, 1]"));
        }
        if self.kappas.is_empty() || self.kappas.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return Err(Error::config(
                "kappas must be a non-empty list of non-negative values",
            ));
        }
        if self.n_bootstrap < 2 {
            return Err(Error::config("n_bootstrap must be at least 2"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if let Some(pc) = &self.price_change {
            if pc.mask.len() != self.n_candidates() {
                return Err(Error::config(format!(
                    "price_change mask has {} entries for {} candidate prices",
                    pc.mask.len(),
                    self.n_candidates()
                )));
            }
            if !(pc.beta >= 0.0 && pc.beta.is_finite()) {
                return Err(Error::config("price_change beta must be non-negative"));
            }
        }
        self.train.validate()?;
        self.exact.validate()?;
        self.heuristic.validate()
    }

    /// Number of candidate prices per consumer.
    pub fn n_candidates(&self) -> usize {
        match &self.source {
            DataSource::Synthetic { .. } => 9,
            DataSource::Csv { schema, .. } => schema.price_grid.len(),
        }
    }

    /// Label written to the `dataset` column of every result row.
    pub fn dataset_label(&self) -> String {
        match &self.source {
            DataSource::Synthetic { dataset_id, .. } => dataset_id.to_string(),
            DataSource::Csv { .. } => "csv".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_takes_defaults() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"source":{"kind":"synthetic","dataset_id":1,"n_train":100,"n_test":10}}"#,
        )
        .unwrap();
        assert_eq!(c, ExperimentConfig::synthetic(1, 100, 10));
        assert!(c.validate().is_ok());
        assert_eq!(c.n_bootstrap, 20);
        assert_eq!(c.alphas, vec![0.5]);
    }

    #[test]
    fn rejects_bad_values() {
        let base = ExperimentConfig::synthetic(1, 100, 10);
        let bad = [
            ExperimentConfig {
                alphas: vec![1.5],
                ..base.clone()
            },
            ExperimentConfig {
                alphas: vec![],
                ..base.clone()
            },
            ExperimentConfig {
                kappas: vec![-1.0],
                ..base.clone()
            },
            ExperimentConfig {
                n_bootstrap: 1,
                ..base.clone()
            },
            ExperimentConfig {
                seeds: vec![],
                ..base.clone()
            },
            ExperimentConfig::synthetic(7, 100, 10),
            ExperimentConfig::synthetic(1, 0, 10),
            ExperimentConfig {
                price_change: Some(PriceChangeSpec {
                    mask: vec![1.0; 3],
                    beta: 0.1,
                }),
                ..base.clone()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
        let unknown = r#"{"source":{"kind":"synthetic","dataset_id":1,"n_train":1,"n_test":1},"alpha":[0.1]}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(unknown).is_err());
    }

    #[test]
    fn csv_path_resolves_next_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        std::fs::write(
            &cfg,
            r#"{"source":{"kind":"csv","path":"tx.csv","schema":{"covariates":[{"name":"x","kind":"numeric"}],
                "price_column":"p","label_column":"y"}}}"#,
        )
        .unwrap();
        let c = ExperimentConfig::load(&cfg).unwrap();
        assert_eq!(c.n_candidates(), 7);
        match c.source {
            DataSource::Csv { path, .. } => assert_eq!(path, dir.path().join("tx.csv")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ExperimentConfig::load(dir.path().join("nope.json")),
            Err(Error::Config(_))
        ));
    }
}
