//! Aggregated result tables and the files written for them.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

/// What the first numeric column of a table indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Trial,
    Gamma,
}

impl Axis {
    pub fn column(self) -> &'static str {
        match self {
            Axis::Trial => "t",
            Axis::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: String,
    pub x: u64,
    pub mean_regret: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl ResultRow {
    /// Mean, standard error and normal 95% interval of `values`.
    pub fn summarize(algorithm: &str, x: u64, values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_err = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        ResultRow {
            algorithm: algorithm.to_string(),
            x,
            mean_regret: mean,
            std_err,
            ci_lo: mean - Z_95 * std_err,
            ci_hi: mean + Z_95 * std_err,
        }
    }

    /// Whether the two confidence intervals are disjoint.
    pub fn separated_from(&self, other: &ResultRow) -> bool {
        self.ci_hi < other.ci_lo || other.ci_hi < self.ci_lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub axis: Axis,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(axis: Axis) -> Self {
        ResultTable { axis, rows: Vec::new() }
    }

    pub fn row(&self, algorithm: &str, x: u64) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.x == x)
    }

    /// Rows of one algorithm, in table order.
    pub fn series<'a>(&'a self, algorithm: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.algorithm == algorithm)
    }

    pub fn last(&self, algorithm: &str) -> Option<&ResultRow> {
        self.rows.iter().rfind(|r| r.algorithm == algorithm)
    }

    pub fn algorithms(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.algorithm.as_str()) {
                out.push(&r.algorithm);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "algorithm",
            self.axis.column(),
            "mean_regret",
            "std_err",
            "ci_lo",
            "ci_hi",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.algorithm.clone(),
                r.x.to_string(),
                r.mean_regret.to_string(),
                r.std_err.to_string(),
                r.ci_lo.to_string(),
                r.ci_hi.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let axis = match headers.get(1) {
            Some("t") => Axis::Trial,
            Some("gamma") => Axis::Gamma,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    reason: format!("unexpected second column {other:?}"),
                })
            }
        };
        let mut table = ResultTable::new(axis);
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let field = |k: usize| -> Result<&str> {
                record.get(k).ok_or_else(|| Error::Parse {
                    line,
                    reason: format!("missing column {k}"),
                })
            };
            let num = |k: usize| -> Result<f64> {
                field(k)?.parse().map_err(|e| Error::Parse {
                    line,
                    reason: format!("column {k}: {e}"),
                })
            };
            table.rows.push(ResultRow {
                algorithm: field(0)?.to_string(),
                x: field(1)?.parse().map_err(|e| Error::Parse {
                    line,
                    reason: format!("column 1: {e}"),
                })?,
                mean_regret: num(2)?,
                std_err: num(3)?,
                ci_lo: num(4)?,
                ci_hi: num(5)?,
            });
        }
        Ok(table)
    }
}

/// Bound check of one algorithm on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub replicate: u32,
    pub algorithm: String,
    pub gamma: u32,
    pub diameter: u32,
    pub cover_size: usize,
    pub horizon: u64,
    pub regret: f64,
    pub lower: f64,
    /// `None` for policies without an upper bound or when the precondition fails.
    pub upper: Option<f64>,
    /// `ok`, `n/a`, or the reason the bound does not apply.
    pub precondition: String,
}

impl BoundRow {
    pub fn contained(&self) -> Option<bool> {
        self.upper.map(|u| self.regret <= u)
    }
}

pub fn write_bounds<W: Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "replicate",
        "algorithm",
        "gamma",
        "diameter",
        "cover_size",
        "t",
        "regret",
        "lower",
        "upper",
        "precondition",
        "contained",
    ])?;
    for r in rows {
        w.write_record([
            r.replicate.to_string(),
            r.algorithm.clone(),
            r.gamma.to_string(),
            r.diameter.to_string(),
            r.cover_size.to_string(),
            r.horizon.to_string(),
            r.regret.to_string(),
            r.lower.to_string(),
            r.upper.map_or(String::new(), |u| u.to_string()),
            r.precondition.clone(),
            r.contained().map_or(String::new(), |c| c.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
