//! Result tables and their CSV form.

use std::io::Write;
use std::path::Path;

use crate::algorithms::RegretTrace;
use crate::error::{Error, Result};

pub const RESULT_HEADER: &str = "algorithm,t,mean_avg_regret,std_avg_regret,trials";

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub algorithm: String,
    pub t: usize,
    pub mean_avg_regret: f64,
    pub std_avg_regret: f64,
    pub trials: usize,
}

/// Mean and standard deviation of `R_t / t` across trials, per algorithm and step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by(|a, b| a.algorithm.cmp(&b.algorithm).then(a.t.cmp(&b.t)));
        ResultTable { rows }
    }

    /// Aggregates one algorithm's per-trial traces; all must share a horizon.
    pub fn from_traces(algorithm: &str, traces: &[RegretTrace]) -> Result<Vec<ResultRow>> {
        let horizon = traces.first().map_or(0, |t| t.steps.len());
        if traces.iter().any(|t| t.steps.len() != horizon) {
            return Err(Error::invalid("traces differ in horizon"));
        }
        let series: Vec<Vec<f64>> = traces.iter().map(RegretTrace::average_series).collect();
        let n = traces.len();
        Ok((0..horizon)
            .map(|i| {
                let col: Vec<f64> = series.iter().map(|s| s[i]).collect();
                let mean = col.iter().sum::<f64>() / n as f64;
                let std = if n > 1 {
                    (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                ResultRow {
                    algorithm: algorithm.to_string(),
                    t: i + 1,
                    mean_avg_regret: mean,
                    std_avg_regret: std,
                    trials: n,
                }
            })
            .collect())
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, algorithm: &str, t: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.t == t)
    }

    pub fn algorithms(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.rows.iter().map(|r| r.algorithm.as_str()).collect();
        names.dedup();
        names
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(RESULT_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.algorithm,
                r.t,
                format_sig9(r.mean_avg_regret),
                format_sig9(r.std_avg_regret),
                r.trials
            ));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        let header = records
            .next()
            .ok_or(Error::Empty("result CSV has no header"))?
            .map_err(|e| Error::Csv(e.to_string()))?;
        if header.iter().collect::<Vec<_>>().join(",") != RESULT_HEADER {
            return Err(Error::Csv(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in records.enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            let row = i + 1;
            if rec.len() != 5 {
                return Err(Error::RaggedRow {
                    row,
                    expected: 5,
                    found: rec.len(),
                });
            }
            let field = |c: usize| rec[c].to_string();
            let parse_err = |c: usize| Error::ParseNumber {
                row,
                column: c,
                value: field(c),
            };
            rows.push(ResultRow {
                algorithm: field(0),
                t: rec[1].parse().map_err(|_| parse_err(1))?,
                mean_avg_regret: parse_float(&rec[2]).ok_or_else(|| parse_err(2))?,
                std_avg_regret: parse_float(&rec[3]).ok_or_else(|| parse_err(3))?,
                trials: rec[4].parse().map_err(|_| parse_err(4))?,
            });
        }
        Ok(ResultTable::new(rows))
    }

    /// The table as it reads back from its CSV form.
    pub fn quantized(&self) -> Self {
        let q = |x: f64| parse_float(&format_sig9(x)).unwrap_or(x);
        ResultTable {
            rows: self
                .rows
                .iter()
                .map(|r| ResultRow {
                    mean_avg_regret: q(r.mean_avg_regret),
                    std_avg_regret: q(r.std_avg_regret),
                    ..r.clone()
                })
                .collect(),
        }
    }
}

fn parse_float(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

/// Nine significant digits: plain decimals for exponents in `[-5, 9)`,
/// otherwise `d.dddde±x`; trailing zeros trimmed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes the table to `path`, creating parent directories.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(table.to_csv().as_bytes())
        .map_err(|e| Error::io(path, e))
}
