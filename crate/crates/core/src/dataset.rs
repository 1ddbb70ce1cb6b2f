use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One purchase opportunity: who was offered what, and whether they bought.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub covariates: Vec<f64>,
    pub price: f64,
    pub purchased: bool,
}

/// Labeled transactions sharing one covariate dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    dim: usize,
    rows: Vec<Observation>,
}

impl LabeledDataset {
    pub fn new(dim: usize, rows: Vec<Observation>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("covariate dimension must be at least 1"));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.covariates.len() != dim {
                return Err(Error::input(format!(
                    "row {r}: {} covariates, expected {dim}",
                    row.covariates.len()
                )));
            }
            if !(row.price > 0.0 && row.price.is_finite()) {
                return Err(Error::input(format!(
                    "row {r}: price {} is not positive",
                    row.price
                )));
            }
        }
        Ok(LabeledDataset { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn covariates(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.covariates.clone()).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.price).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.purchased).collect()
    }

    /// Rows at the given positions, in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            dim: self.dim,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Writes columns `x1..xn, price, purchased`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        header.push("price".into());
        header.push("purchased".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record: Vec<String> = row.covariates.iter().map(f64::to_string).collect();
            record.push(row.price.to_string());
            record.push(if row.purchased { "1" } else { "0" }.into());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads the layout produced by [`LabeledDataset::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let dim = headers.iter().filter(|h| h.starts_with('x')).count();
        if headers.len() != dim + 2 {
            return Err(Error::input("expected columns x1..xn, price, purchased"));
        }
        let mut rows = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record[k].trim().parse().map_err(|_| {
                    Error::input(format!("row {}: bad number {:?}", r + 1, &record[k]))
                })
            };
            let covariates = (0..dim).map(parse).collect::<Result<Vec<_>>>()?;
            let price = parse(dim)?;
            let purchased = match record[dim + 1].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::input(format!(
                        "row {}: label {other:?} not 0/1",
                        r + 1
                    )))
                }
            };
            rows.push(Observation {
                covariates,
                price,
                purchased,
            });
        }
        LabeledDataset::new(dim, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let data = LabeledDataset::new(
            2,
            vec![
                Observation {
                    covariates: vec![0.25, -1.5],
                    price: 4.99,
                    purchased: true,
                },
                Observation {
                    covariates: vec![1e-3, 2.0],
                    price: 1.0,
                    purchased: false,
                },
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x1,x2,price,purchased\n"));
        assert_eq!(LabeledDataset::read_csv(&buf[..]).unwrap(), data);
    }

    #[test]
    fn rejects_bad_rows() {
        let row = |c: Vec<f64>, p| Observation {
            covariates: c,
            price: p,
            purchased: false,
        };
        assert!(LabeledDataset::new(1, vec![row(vec![1.0, 2.0], 1.0)]).is_err());
        assert!(LabeledDataset::new(1, vec![row(vec![1.0], -1.0)]).is_err());
        assert!(LabeledDataset::new(0, vec![]).is_err());
    }
}
