//! Sensor-reading tables: `timestamp,<id>,<id>,...` with one row per time.
//!
//! A missing reading is an empty cell or `NA`. Rows are returned sorted by
//! timestamp (stable, so equal stamps keep file order).

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct SensorDataset {
    pub ids: Vec<String>,
    pub timestamps: Vec<f64>,
    pub readings: Vec<Vec<Option<f64>>>,
}

/// Complete rows kept after dropping those with missing readings.
#[derive(Clone, Debug, PartialEq)]
pub struct CompleteRows {
    pub timestamps: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na")
}

impl SensorDataset {
    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        let header = records
            .next()
            .ok_or(Error::Empty("sensor file has no header"))?
            .map_err(|e| Error::Csv(e.to_string()))?;
        if header.len() < 2 || header[0].trim() != "timestamp" {
            return Err(Error::Csv(
                "header must be timestamp followed by sensor IDs".into(),
            ));
        }
        let ids: Vec<String> = header
            .iter()
            .skip(1)
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows: Vec<(f64, Vec<Option<f64>>)> = Vec::new();
        for (i, rec) in records.enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            let row = i + 1;
            if rec.len() != header.len() {
                return Err(Error::RaggedRow {
                    row,
                    expected: header.len(),
                    found: rec.len(),
                });
            }
            let number = |c: usize| -> Result<f64> {
                rec[c]
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::ParseNumber {
                        row,
                        column: c,
                        value: rec[c].to_string(),
                    })
            };
            let stamp = number(0)?;
            let values = (1..rec.len())
                .map(|c| {
                    if is_missing(&rec[c]) {
                        Ok(None)
                    } else {
                        number(c).map(Some)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((stamp, values));
        }
        if rows.is_empty() {
            return Err(Error::Empty("sensor file has no data rows"));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (timestamps, readings) = rows.into_iter().unzip();
        Ok(SensorDataset {
            ids,
            timestamps,
            readings,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SensorDataset::parse(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp");
        for id in &self.ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (t, row) in self.timestamps.iter().zip(&self.readings) {
            out.push_str(&format!("{t}"));
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.readings.len()
    }

    /// Keeps only the named sensors, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<SensorDataset> {
        let cols = ids
            .iter()
            .map(|id| {
                self.ids
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::Config(format!("sensor {id:?} not in data")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SensorDataset {
            ids: ids.to_vec(),
            timestamps: self.timestamps.clone(),
            readings: self
                .readings
                .iter()
                .map(|r| cols.iter().map(|&c| r[c]).collect())
                .collect(),
        })
    }

    /// Rows `range` with any missing reading dropped.
    pub fn complete_rows(&self, range: std::ops::Range<usize>) -> CompleteRows {
        let mut out = CompleteRows {
            timestamps: Vec::new(),
            rows: Vec::new(),
            dropped: 0,
        };
        for i in range {
            match self.readings[i]
                .iter()
                .copied()
                .collect::<Option<Vec<f64>>>()
            {
                Some(row) => {
                    out.timestamps.push(self.timestamps[i]);
                    out.rows.push(row);
                }
                None => out.dropped += 1,
            }
        }
        out
    }
}

/// Sample covariance across rows (unbiased), symmetrized.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::invalid("covariance needs at least two rows"));
    }
    let m = rows[0].len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::invalid(
            "covariance rows must be rectangular and non-empty",
        ));
    }
    let data = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
    let means = data.row_mean();
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    Ok((&cov + cov.transpose()) * 0.5)
}

/// An empirical-covariance kernel plus the affine map that puts readings on
/// its scale: `(reading - offset) / scale`.
#[derive(Clone, Debug)]
pub struct EmpiricalModel {
    pub kernel: KernelSpec,
    pub offset: f64,
    pub scale: f64,
}

/// Relative diagonal jitter added before the covariance becomes a kernel.
pub const COVARIANCE_JITTER: f64 = 1e-8;

/// Builds the kernel from training rows. Sensors with zero variance are kept
/// (with a warning); jitter keeps the matrix positive definite.
pub fn empirical_covariance(rows: &[Vec<f64>]) -> Result<EmpiricalModel> {
    let mut cov = sample_covariance(rows)?;
    let m = cov.nrows();
    for j in 0..m {
        if cov[(j, j)] == 0.0 {
            log::warn!("sensor column {j} is constant over the training rows");
        }
    }
    let max_diag = cov.diagonal().max();
    let jitter = COVARIANCE_JITTER * if max_diag > 0.0 { max_diag } else { 1.0 };
    for j in 0..m {
        cov[(j, j)] += jitter;
    }
    let variance = cov.diagonal().max();
    let total: f64 = rows.iter().flatten().sum();
    let offset = total / (rows.len() * m) as f64;
    Ok(EmpiricalModel {
        kernel: KernelSpec::empirical(cov, 1.0)?,
        offset,
        scale: variance.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn parses_small_file_in_time_order() {
        let d = SensorDataset::parse("timestamp,a,b\n20,3.5,4\n10,1,2\n").unwrap();
        assert_eq!(d.ids, vec!["a", "b"]);
        assert_eq!(d.timestamps, vec![10.0, 20.0]);
        assert_eq!(
            d.readings,
            vec![vec![Some(1.0), Some(2.0)], vec![Some(3.5), Some(4.0)]]
        );
    }

    #[test]
    fn missing_cells_drop_rows() {
        let d = SensorDataset::parse("timestamp,a,b\n1,1,NA\n2,1,2\n3,,2\n4,5,6\n").unwrap();
        let c = d.complete_rows(0..4);
        assert_eq!(c.dropped, 2);
        assert_eq!(c.rows, vec![vec![1.0, 2.0], vec![5.0, 6.0]]);
        assert_eq!(c.timestamps, vec![2.0, 4.0]);
    }

    #[test]
    fn errors_are_distinct() {
        assert!(matches!(SensorDataset::parse(""), Err(Error::Empty(_))));
        assert!(matches!(
            SensorDataset::parse("timestamp,a\n"),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            SensorDataset::parse("time,a\n1,2\n"),
            Err(Error::Csv(_))
        ));
        assert!(matches!(
            SensorDataset::parse("timestamp,a,b\n1,2\n"),
            Err(Error::RaggedRow {
                row: 1,
                expected: 3,
                found: 2
            })
        ));
        assert!(matches!(
            SensorDataset::parse("timestamp,a\n1,warm\n"),
            Err(Error::ParseNumber {
                row: 1,
                column: 1,
                ..
            })
        ));
    }

    #[test]
    fn selects_sensors_by_id() {
        let d = SensorDataset::parse("timestamp,7,9,11\n1,1,2,3\n").unwrap();
        let s = d.select(&["11".into(), "7".into()]).unwrap();
        assert_eq!(s.readings, vec![vec![Some(3.0), Some(1.0)]]);
        assert!(d.select(&["8".into()]).is_err());
    }

    #[test]
    fn identical_rows_have_zero_covariance() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        assert_eq!(sample_covariance(&rows).unwrap(), DMatrix::zeros(3, 3));
        let model = empirical_covariance(&rows).unwrap();
        match model.kernel {
            KernelSpec::Empirical(e) => assert!((e.matrix().diagonal().max() - 1.0).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn white_noise_covariance_is_identity() {
        let mut rng = stream_rng(4, 0, Stream::Instance);
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                (0..4)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let cov = sample_covariance(&rows).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov[(i, j)] - want).abs() < 0.05,
                    "({i},{j}) = {}",
                    cov[(i, j)]
                );
            }
        }
        let model = empirical_covariance(&rows).unwrap();
        assert!((model.scale - 1.0).abs() < 0.05);
        assert!(model.offset.abs() < 0.05);
    }

    proptest! {
        #[test]
        fn sensor_csv_round_trip(
            rows in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.8, -1e6f64..1e6), 3), 1..20)
        ) {
            let d = SensorDataset {
                ids: vec!["s1".into(), "s2".into(), "s3".into()],
                timestamps: (0..rows.len()).map(|i| i as f64 * 600.0).collect(),
                readings: rows,
            };
            prop_assert_eq!(SensorDataset::parse(&d.to_csv()).unwrap(), d);
        }
    }
}
