//! Price and return panels: loading, validation, and elementary transforms.

use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::fmt_num;

/// Minimum usable rows for GARCH estimation.
pub const MIN_ROWS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// Rows are dates, columns are tickers.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Rows discarded while loading.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DropReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub dropped_dates: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub date_column: String,
    pub min_rows: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            date_column: "date".to_string(),
            min_rows: MIN_ROWS,
        }
    }
}

fn check_shape(dates: &[NaiveDate], tickers: &[String], values: &[Vec<f64>]) -> Result<()> {
    if values.len() != dates.len() {
        return Err(Error::InvalidData(format!(
            "{} rows of values for {} dates",
            values.len(),
            dates.len()
        )));
    }
    if let Some(row) = values.iter().position(|r| r.len() != tickers.len()) {
        return Err(Error::InvalidData(format!("row {row} is not rectangular")));
    }
    if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidData(format!("dates not strictly increasing at {}", w[1])));
    }
    let mut seen = std::collections::HashSet::new();
    for t in tickers {
        if !seen.insert(t.as_str()) {
            return Err(Error::InvalidData(format!("duplicated ticker {t}")));
        }
    }
    Ok(())
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_shape(&dates, &tickers, &values)?;
        if values.iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidData("prices must be finite and > 0".into()));
        }
        Ok(PricePanel { dates, tickers, values })
    }
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_shape(&dates, &tickers, &values)?;
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("returns must be finite".into()));
        }
        Ok(ReturnPanel { dates, tickers, values })
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[i]).collect()
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    /// Panel restricted to the given columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> ReturnPanel {
        ReturnPanel {
            dates: self.dates.clone(),
            tickers: columns.iter().map(|&i| self.tickers[i].clone()).collect(),
            values: self
                .values
                .iter()
                .map(|r| columns.iter().map(|&i| r[i]).collect())
                .collect(),
        }
    }
}

struct RawTable {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

fn read_table(path: &Path, date_column: &str) -> Result<RawTable> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == date_column)
        .ok_or_else(|| Error::InvalidData(format!("no `{date_column}` column")))?;
    let tickers: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != date_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    if tickers.len() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 tickers, found {}",
            tickers.len()
        )));
    }

    let mut dated: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|e| Error::InvalidData(format!("row {}: bad date `{raw_date}`: {e}", line + 2)))?;
        let cells = (0..headers.len())
            .filter(|i| *i != date_idx)
            .map(|i| record.get(i).and_then(|s| s.parse::<f64>().ok()))
            .collect();
        dated.push((date, cells));
    }
    dated.sort_by_key(|(d, _)| *d);
    if let Some(w) = dated.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidData(format!("duplicated date {}", w[0].0)));
    }
    let (dates, rows) = dated.into_iter().unzip();
    Ok(RawTable { dates, tickers, rows })
}

type Panel = (Vec<NaiveDate>, Vec<String>, Vec<Vec<f64>>);

fn filter_rows(table: RawTable, keep: impl Fn(f64) -> bool, min_rows: usize) -> Result<(Panel, DropReport)> {
    let mut report = DropReport {
        rows_read: table.rows.len(),
        ..Default::default()
    };
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (date, row) in table.dates.into_iter().zip(table.rows) {
        let parsed: Option<Vec<f64>> = row.into_iter().map(|c| c.filter(|v| keep(*v))).collect();
        match parsed {
            Some(r) => {
                dates.push(date);
                values.push(r);
            }
            None => {
                report.rows_dropped += 1;
                report.dropped_dates.push(date.to_string());
            }
        }
    }
    if dates.len() < min_rows {
        return Err(Error::InvalidData(format!(
            "only {} usable rows, need at least {min_rows}",
            dates.len()
        )));
    }
    Ok(((dates, table.tickers, values), report))
}

/// Load a price CSV. Rows with any missing, non-numeric or non-positive cell
/// are dropped and counted in the returned report.
pub fn load_price_panel(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<(PricePanel, DropReport)> {
    let table = read_table(path.as_ref(), &opts.date_column)?;
    let ((dates, tickers, values), report) = filter_rows(table, |v| v.is_finite() && v > 0.0, opts.min_rows)?;
    Ok((PricePanel::new(dates, tickers, values)?, report))
}

/// Load pre-computed returns in the same layout; rows with missing or
/// non-finite cells are dropped.
pub fn load_return_panel(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<(ReturnPanel, DropReport)> {
    let table = read_table(path.as_ref(), &opts.date_column)?;
    let ((dates, tickers, values), report) = filter_rows(table, f64::is_finite, opts.min_rows)?;
    Ok((ReturnPanel::new(dates, tickers, values)?, report))
}

/// Log returns; each return is stamped with the later date of its pair.
pub fn log_returns(panel: &PricePanel) -> ReturnPanel {
    let values = panel
        .values
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b.ln() - a.ln()).collect())
        .collect();
    ReturnPanel {
        dates: panel.dates.iter().skip(1).copied().collect(),
        tickers: panel.tickers.clone(),
        values,
    }
}

/// Rebuild prices from returns, starting every ticker at `start` on `start_date`.
pub fn cumulative_prices(returns: &ReturnPanel, start_date: NaiveDate, start: f64) -> Result<PricePanel> {
    let k = returns.tickers.len();
    let mut log_p = vec![start.ln(); k];
    let mut values = vec![vec![start; k]];
    for row in &returns.values {
        for (lp, r) in log_p.iter_mut().zip(row) {
            *lp += r;
        }
        values.push(log_p.iter().map(|v| v.exp()).collect());
    }
    let mut dates = vec![start_date];
    dates.extend_from_slice(&returns.dates);
    PricePanel::new(dates, returns.tickers.clone(), values)
}

/// Trailing moving average. The first `window - 1` entries are `None`.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    if window == 0 || window > series.len() {
        return Err(Error::domain("window", format!("{window} not in 1..={}", series.len())));
    }
    let mut out = vec![None; window - 1];
    let mut sum: f64 = series[..window].iter().sum();
    out.push(Some(sum / window as f64));
    for t in window..series.len() {
        sum += series[t] - series[t - window];
        out.push(Some(sum / window as f64));
    }
    Ok(out)
}

/// Trailing moving average over a series that may contain gaps; a window
/// containing any gap yields `None`.
pub fn moving_average_opt(series: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    (0..series.len())
        .map(|t| {
            if window == 0 || t + 1 < window {
                return None;
            }
            let slice = &series[t + 1 - window..=t];
            let total: Option<f64> = slice.iter().copied().sum();
            total.map(|s| s / window as f64)
        })
        .collect()
}

/// Write a dates × tickers table.
pub fn write_panel_csv(
    path: impl AsRef<Path>,
    dates: &[NaiveDate],
    tickers: &[String],
    values: &[Vec<f64>],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut header = vec!["date".to_string()];
    header.extend(tickers.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (d, row) in dates.iter().zip(values) {
        let mut rec = vec![d.to_string()];
        rec.extend(row.iter().map(|v| fmt_num(*v)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn small_opts() -> LoadOptions {
        LoadOptions {
            min_rows: 1,
            ..Default::default()
        }
    }

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_valid_rows() {
        let f = csv_file("date,A,B\n2020-01-03,100,50\n2020-01-10,101,51\n2020-01-17,99,52\n");
        let (p, rep) = load_price_panel(f.path(), &small_opts()).unwrap();
        assert_eq!(p.dates.len(), 3);
        assert_eq!(rep.rows_dropped, 0);
    }

    #[test]
    fn blank_cell_drops_row() {
        let f = csv_file("date,A,B\n2020-01-03,100,50\n2020-01-10,,51\n2020-01-17,99,52\n");
        let (p, rep) = load_price_panel(f.path(), &small_opts()).unwrap();
        assert_eq!(p.dates.len(), 2);
        assert_eq!(rep.rows_dropped, 1);
        assert_eq!(rep.dropped_dates, vec!["2020-01-10"]);
    }

    #[test]
    fn zero_price_drops_row() {
        let f = csv_file("date,A,B\n2020-01-03,100,50\n2020-01-10,0,51\n2020-01-17,99,52\n");
        let (p, rep) = load_price_panel(f.path(), &small_opts()).unwrap();
        assert_eq!(p.dates.len(), 2);
        assert_eq!(rep.rows_dropped, 1);
    }

    #[test]
    fn rows_are_sorted() {
        let f = csv_file("date,A,B\n2020-01-17,99,52\n2020-01-03,100,50\n");
        let (p, _) = load_price_panel(f.path(), &small_opts()).unwrap();
        assert!(p.dates[0] < p.dates[1]);
        assert_eq!(p.values[0], vec![100.0, 50.0]);
    }

    #[test]
    fn rejects_single_ticker_and_short_panels() {
        let f = csv_file("date,A\n2020-01-03,100\n");
        assert!(load_price_panel(f.path(), &small_opts()).is_err());
        let f = csv_file("date,A,B\n2020-01-03,100,50\n");
        assert!(load_price_panel(f.path(), &LoadOptions::default()).is_err());
        assert!(load_price_panel("/nonexistent/file.csv", &small_opts()).is_err());
    }

    #[test]
    fn log_return_values() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        let p = PricePanel::new(
            vec![d("2020-01-03"), d("2020-01-10")],
            vec!["A".into(), "B".into(), "C".into()],
            vec![vec![100.0, 100.0, 100.0], vec![100.0, 110.0, 90.0]],
        )
        .unwrap();
        let r = log_returns(&p);
        assert_eq!(r.dates, vec![d("2020-01-10")]);
        assert_eq!(r.values[0][0], 0.0);
        assert!((r.values[0][1] - 0.0953102).abs() < 1e-7);
        assert!((r.values[0][2] + 0.1053605).abs() < 1e-7);
    }

    #[test]
    fn moving_average_examples() {
        let ma = moving_average(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(ma, vec![None, Some(1.5), Some(2.5), Some(3.5)]);
        let ma = moving_average(&[7.0; 9], 4).unwrap();
        assert!(ma[3..].iter().all(|v| (v.unwrap() - 7.0).abs() < 1e-15));
        assert!(moving_average(&[1.0; 5], 6).is_err());
        assert!(moving_average(&[1.0; 5], 0).is_err());
    }

    #[test]
    fn moving_average_with_gaps() {
        let s = [Some(1.0), None, Some(3.0), Some(5.0)];
        assert_eq!(moving_average_opt(&s, 2), vec![None, None, None, Some(4.0)]);
    }
}
