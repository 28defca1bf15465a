use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;

use super::dcc::PairDependence;
use crate::error::{Error, Result};
use crate::format::fmt_num;

/// Per-date symmetric matrices of pairwise lower tail dependence.
#[derive(Debug, Clone, PartialEq)]
pub struct TailDepTensor {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// One row-major `k * k` matrix per date.
    values: Vec<Vec<f64>>,
}

impl TailDepTensor {
    pub fn k(&self) -> usize {
        self.tickers.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.values[t][i * self.k() + j]
    }

    pub fn matrix(&self, t: usize) -> Vec<Vec<f64>> {
        self.values[t].chunks(self.k()).map(|r| r.to_vec()).collect()
    }

    /// Build from dense per-date matrices; checks symmetry, unit diagonal
    /// and the [0, 1] range.
    pub fn from_matrices(tickers: Vec<String>, dates: Vec<NaiveDate>, matrices: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let k = tickers.len();
        if matrices.len() != dates.len() {
            return Err(Error::InvalidData("one matrix per date required".into()));
        }
        let mut values = Vec::with_capacity(matrices.len());
        for (t, m) in matrices.iter().enumerate() {
            if m.len() != k || m.iter().any(|r| r.len() != k) {
                return Err(Error::InvalidData(format!("matrix {t} is not {k}x{k}")));
            }
            for i in 0..k {
                for j in 0..k {
                    let v = m[i][j];
                    if !(0.0..=1.0).contains(&v) || v != m[j][i] || (i == j && v != 1.0) {
                        return Err(Error::InvalidData(format!(
                            "matrix {t} entry ({i}, {j}) = {v} is invalid"
                        )));
                    }
                }
            }
            values.push(m.iter().flatten().copied().collect());
        }
        Ok(TailDepTensor { tickers, dates, values })
    }

    /// Long-format CSV: `date,i,j,lambda` for `i < j`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["date", "i", "j", "lambda"]).map_err(err)?;
        for (t, date) in self.dates.iter().enumerate() {
            let d = date.to_string();
            for i in 0..self.k() {
                for j in i + 1..self.k() {
                    w.write_record([
                        d.as_str(),
                        &self.tickers[i],
                        &self.tickers[j],
                        &fmt_num(self.get(t, i, j)),
                    ])
                    .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Read the long format written by [`TailDepTensor::write_csv`]. Ticker
    /// order follows first appearance.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(err)?;
        let mut tickers: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut dates: Vec<NaiveDate> = Vec::new();
        let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(err)?;
            if rec.len() < 4 {
                return Err(Error::InvalidData("expected date,i,j,lambda".into()));
            }
            let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
                .map_err(|e| Error::InvalidData(format!("bad date `{}`: {e}", &rec[0])))?;
            if dates.last() != Some(&date) {
                if dates.last().is_some_and(|d| *d > date) || dates.contains(&date) {
                    return Err(Error::InvalidData("dates must be grouped and increasing".into()));
                }
                dates.push(date);
            }
            let mut id = |name: &str| {
                *index.entry(name.to_string()).or_insert_with(|| {
                    tickers.push(name.to_string());
                    tickers.len() - 1
                })
            };
            let (i, j) = (id(&rec[1]), id(&rec[2]));
            let lambda: f64 = rec[3]
                .parse()
                .map_err(|_| Error::InvalidData(format!("bad lambda `{}`", &rec[3])))?;
            entries.push((dates.len() - 1, i, j, lambda));
        }
        let k = tickers.len();
        let mut matrices = vec![vec![vec![f64::NAN; k]; k]; dates.len()];
        for m in matrices.iter_mut() {
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = 1.0;
            }
        }
        for (t, i, j, v) in entries {
            matrices[t][i][j] = v;
            matrices[t][j][i] = v;
        }
        if let Some((t, _)) = matrices
            .iter()
            .enumerate()
            .find(|(_, m)| m.iter().flatten().any(|v| v.is_nan()))
        {
            return Err(Error::InvalidData(format!("missing pairs on {}", dates[t])));
        }
        Self::from_matrices(tickers, dates, matrices)
    }
}

/// Assemble the per-date tail-dependence matrices from all pair fits.
///
/// Every unordered pair of `tickers` must be present exactly once (in either
/// orientation) and all series must have `dates.len()` entries.
pub fn tail_dep_tensor(fits: &[PairDependence], tickers: &[String], dates: &[NaiveDate]) -> Result<TailDepTensor> {
    let k = tickers.len();
    let index: HashMap<&str, usize> = tickers.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut slot: Vec<Option<usize>> = vec![None; k * k];
    for (n, fit) in fits.iter().enumerate() {
        let (Some(&i), Some(&j)) = (index.get(fit.pair.0.as_str()), index.get(fit.pair.1.as_str())) else {
            return Err(Error::InvalidData(format!(
                "pair {}/{} refers to an unknown ticker",
                fit.pair.0, fit.pair.1
            )));
        };
        if i == j || slot[i * k + j].is_some() {
            return Err(Error::InvalidData(format!(
                "pair {}/{} is invalid or duplicated",
                fit.pair.0, fit.pair.1
            )));
        }
        if fit.lambda.len() != dates.len() {
            return Err(Error::InvalidData(format!(
                "pair {}/{} has {} periods, expected {}",
                fit.pair.0,
                fit.pair.1,
                fit.lambda.len(),
                dates.len()
            )));
        }
        slot[i * k + j] = Some(n);
        slot[j * k + i] = Some(n);
    }
    let expected = k * (k - 1) / 2;
    if fits.len() != expected {
        return Err(Error::InvalidData(format!(
            "{} pairs supplied, {expected} required for {k} tickers",
            fits.len()
        )));
    }
    let values = (0..dates.len())
        .map(|t| {
            (0..k * k)
                .map(|ij| match slot[ij] {
                    Some(n) => fits[n].lambda[t],
                    None => 1.0,
                })
                .collect()
        })
        .collect();
    Ok(TailDepTensor {
        tickers: tickers.to_vec(),
        dates: dates.to_vec(),
        values,
    })
}
