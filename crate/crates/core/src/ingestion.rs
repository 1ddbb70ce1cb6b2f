//! Loading flat transaction CSVs into a [`LabeledDataset`].
//!
//! A row whose price is missing and whose label is 0 takes the mean of that
//! household's last three purchase prices before it in time order, or of as
//! many as exist. With no earlier purchase the row is dropped and counted.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Observation};
use crate::error::{Error, Result};

/// How many earlier purchases feed an imputed price.
pub const IMPUTATION_WINDOW: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    Numeric,
    /// One indicator column per level, in the listed order.
    Categorical {
        levels: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateColumn {
    pub name: String,
    #[serde(flatten)]
    pub encoding: Encoding,
}

impl CovariateColumn {
    pub fn numeric(name: impl Into<String>) -> Self {
        CovariateColumn {
            name: name.into(),
            encoding: Encoding::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: &[&str]) -> Self {
        CovariateColumn {
            name: name.into(),
            encoding: Encoding::Categorical {
                levels: levels.iter().map(|l| l.to_string()).collect(),
            },
        }
    }

    fn width(&self) -> usize {
        match &self.encoding {
            Encoding::Numeric => 1,
            Encoding::Categorical { levels } => levels.len(),
        }
    }
}

fn default_price_grid() -> Vec<f64> {
    (0..7).map(|k| 1.99 + 0.5 * k as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransactionSchema {
    pub covariates: Vec<CovariateColumn>,
    pub price_column: String,
    pub label_column: String,
    /// Without a household column every row shares one history.
    #[serde(default)]
    pub household_column: Option<String>,
    /// Without an order column the file order is the time order.
    #[serde(default)]
    pub order_column: Option<String>,
    /// Candidate prices offered to every consumer.
    #[serde(default = "default_price_grid")]
    pub price_grid: Vec<f64>,
}

impl TransactionSchema {
    pub fn new(covariates: Vec<CovariateColumn>, price_column: &str, label_column: &str) -> Self {
        TransactionSchema {
            covariates,
            price_column: price_column.into(),
            label_column: label_column.into(),
            household_column: None,
            order_column: None,
            price_grid: default_price_grid(),
        }
    }

    /// Width of the encoded covariate vector.
    pub fn dim(&self) -> usize {
        self.covariates.iter().map(CovariateColumn::width).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::config("schema encodes no covariates"));
        }
        if let Some(c) = self.covariates.iter().find(|c| c.width() == 0) {
            return Err(Error::config(format!(
                "categorical column {} lists no levels",
                c.name
            )));
        }
        if self.price_grid.is_empty()
            || self.price_grid.iter().any(|&p| !(p > 0.0 && p.is_finite()))
        {
            return Err(Error::config("price grid must be non-empty and positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestionReport {
    pub dataset: LabeledDataset,
    pub imputed: usize,
    /// Missing-price rows with no earlier purchase to impute from.
    pub dropped: usize,
}

pub fn load_dataset_csv(
    path: impl AsRef<Path>,
    schema: &TransactionSchema,
) -> Result<IngestionReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    read_dataset_csv(file, schema)
}

struct ParsedRow {
    covariates: Vec<f64>,
    price: Option<f64>,
    purchased: bool,
    household: String,
    order: f64,
}

pub fn read_dataset_csv<R: Read>(reader: R, schema: &TransactionSchema) -> Result<IngestionReport> {
    schema.validate()?;
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::input(format!("missing column {name}")))
    };
    let covariate_idx = schema
        .covariates
        .iter()
        .map(|c| column(&c.name))
        .collect::<Result<Vec<_>>>()?;
    let price_idx = column(&schema.price_column)?;
    let label_idx = column(&schema.label_column)?;
    let household_idx = schema.household_column.as_deref().map(column).transpose()?;
    let order_idx = schema.order_column.as_deref().map(column).transpose()?;

    let mut rows = Vec::new();
    for (k, record) in csv.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k as u64 + 2, |p| p.line());
        let field = |idx: usize| record.get(idx).unwrap_or("").trim();
        let number = |idx: usize, what: &str| {
            field(idx)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::input(format!(
                        "line {line}: {what} {:?} is not a number",
                        field(idx)
                    ))
                })
        };

        let mut covariates = Vec::with_capacity(schema.dim());
        for (col, &idx) in schema.covariates.iter().zip(&covariate_idx) {
            match &col.encoding {
                Encoding::Numeric => covariates.push(number(idx, &col.name)?),
                Encoding::Categorical { levels } => {
                    let value = field(idx);
                    let hit = levels.iter().position(|l| l == value).ok_or_else(|| {
                        Error::input(format!(
                            "line {line}: {value:?} is not a level of {}",
                            col.name
                        ))
                    })?;
                    covariates.extend((0..levels.len()).map(|l| if l == hit { 1.0 } else { 0.0 }));
                }
            }
        }
        let purchased = match field(label_idx) {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::input(format!(
                    "line {line}: label {other:?} is not 0 or 1"
                )))
            }
        };
        let price = if is_missing(field(price_idx)) {
            if purchased {
                return Err(Error::input(format!(
                    "line {line}: purchased row has no price"
                )));
            }
            None
        } else {
            let p = number(price_idx, "price")?;
            if p <= 0.0 {
                return Err(Error::input(format!(
                    "line {line}: price {p} is not positive"
                )));
            }
            Some(p)
        };
        rows.push(ParsedRow {
            covariates,
            price,
            purchased,
            household: household_idx
                .map(|i| field(i).to_string())
                .unwrap_or_default(),
            order: match order_idx {
                Some(i) => number(i, "order")?,
                None => k as f64,
            },
        });
    }

    let imputed_prices = impute(&rows);
    let mut imputed = 0;
    let mut dropped = 0;
    let mut kept = Vec::with_capacity(rows.len());
    for (row, fill) in rows.into_iter().zip(imputed_prices) {
        let price = match (row.price, fill) {
            (Some(p), _) => p,
            (None, Some(p)) => {
                imputed += 1;
                p
            }
            (None, None) => {
                dropped += 1;
                continue;
            }
        };
        kept.push(Observation {
            covariates: row.covariates,
            price,
            purchased: row.purchased,
        });
    }
    Ok(IngestionReport {
        dataset: LabeledDataset::new(schema.dim(), kept)?,
        imputed,
        dropped,
    })
}

fn is_missing(value: &str) -> bool {
    value.is_empty() || value.eq_ignore_ascii_case("na") || value.eq_ignore_ascii_case("nan")
}

/// Imputed price for each missing-price row, in input order.
fn impute(rows: &[ParsedRow]) -> Vec<Option<f64>> {
    let mut by_household: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        by_household
            .entry(row.household.as_str())
            .or_default()
            .push(i);
    }
    let mut out = vec![None; rows.len()];
    for mut members in by_household.into_values() {
        // stable, so equal orders keep file order
        members.sort_by(|&a, &b| rows[a].order.total_cmp(&rows[b].order));
        let mut start = 0;
        while start < members.len() {
            let order = rows[members[start]].order;
            let end = start
                + members[start..]
                    .iter()
                    .take_while(|&&i| rows[i].order == order)
                    .count();
            // purchases strictly earlier in time
            let history: Vec<f64> = members[..start]
                .iter()
                .filter(|&&i| rows[i].purchased)
                .filter_map(|&i| rows[i].price)
                .collect();
            let recent = &history[history.len().saturating_sub(IMPUTATION_WINDOW)..];
            let fill =
                (!recent.is_empty()).then(|| recent.iter().sum::<f64>() / recent.len() as f64);
            for &i in &members[start..end] {
                if rows[i].price.is_none() {
                    out[i] = fill;
                }
            }
            start = end;
        }
    }
    out
}
