//! Market-state windows and per-state distribution summaries.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::covar::write_file;
use crate::error::{Error, Result};
use crate::format::fmt_opt;

/// Label for dates outside every window.
pub const NORMAL: &str = "N";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateWindow {
    pub label: String,
    /// Inclusive.
    pub start: NaiveDate,
    /// Inclusive.
    pub end: NaiveDate,
}

/// Non-overlapping labelled date windows; everything else is [`NORMAL`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateWindows {
    windows: Vec<StateWindow>,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

impl Default for StateWindows {
    /// Subprime and public-debt crisis, immigration crisis, France-Italy crisis.
    fn default() -> Self {
        let w = |label: &str, start, end| StateWindow {
            label: label.into(),
            start,
            end,
        };
        StateWindows {
            windows: vec![
                w("SMC", ymd(2008, 2, 8), ymd(2013, 3, 1)),
                w("I", ymd(2015, 8, 7), ymd(2016, 9, 23)),
                w("FIC", ymd(2017, 4, 21), ymd(2018, 5, 11)),
            ],
        }
    }
}

impl StateWindows {
    pub fn new(mut windows: Vec<StateWindow>) -> Result<Self> {
        for w in &windows {
            if w.start > w.end {
                return Err(Error::Config(format!("window {} starts after it ends", w.label)));
            }
            if w.label.is_empty() || w.label == NORMAL {
                return Err(Error::Config(format!(
                    "window label {:?} is reserved or empty",
                    w.label
                )));
            }
        }
        windows.sort_by_key(|w| w.start);
        for pair in windows.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::Config(format!(
                    "windows {} and {} overlap",
                    pair[0].label, pair[1].label
                )));
            }
        }
        Ok(StateWindows { windows })
    }

    pub fn windows(&self) -> &[StateWindow] {
        &self.windows
    }

    /// [`NORMAL`] followed by the window labels in date order, without repeats.
    pub fn labels(&self) -> Vec<String> {
        let mut out = vec![NORMAL.to_string()];
        for w in &self.windows {
            if !out.contains(&w.label) {
                out.push(w.label.clone());
            }
        }
        out
    }

    pub fn label_of(&self, date: NaiveDate) -> &str {
        self.windows
            .iter()
            .find(|w| w.start <= date && date <= w.end)
            .map_or(NORMAL, |w| w.label.as_str())
    }
}

pub fn classify(dates: &[NaiveDate], windows: &StateWindows) -> Vec<String> {
    dates.iter().map(|d| windows.label_of(*d).to_string()).collect()
}

/// Number of dates per label, zero for labels that never occur.
pub fn state_counts(labels: &[String], windows: &StateWindows) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = windows.labels().into_iter().map(|l| (l, 0)).collect();
    for l in labels {
        *counts.entry(l.clone()).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (divisor `n - 1`).
    pub sd: Option<f64>,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) p`).
fn quantile_sorted(x: &[f64], p: f64) -> f64 {
    let h = (x.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(x.len() - 1);
    x[lo] + (h - lo as f64) * (x[hi] - x[lo])
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                count: 0,
                mean: None,
                sd: None,
                min: None,
                q1: None,
                median: None,
                q3: None,
                max: None,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Summary {
            count: n,
            mean: Some(mean),
            sd,
            min: Some(sorted[0]),
            q1: Some(quantile_sorted(&sorted, 0.25)),
            median: Some(quantile_sorted(&sorted, 0.5)),
            q3: Some(quantile_sorted(&sorted, 0.75)),
            max: Some(sorted[n - 1]),
        }
    }
}

/// state -> column -> statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StateSummary(pub BTreeMap<String, BTreeMap<String, Summary>>);

/// Column name, values, and the state label of each value.
pub type LabelledColumn = (String, Vec<Option<f64>>, Vec<String>);

/// Summaries of each column within each state. `labels[t]` is the state of
/// observation `t`; undefined (`None`) values are skipped. Every state of
/// `states` appears, with count 0 if it has no observations.
pub fn state_summary(columns: &[LabelledColumn], states: &[String]) -> Result<StateSummary> {
    let mut out: BTreeMap<String, BTreeMap<String, Summary>> = BTreeMap::new();
    for state in states {
        out.entry(state.clone()).or_default();
    }
    for (name, values, labels) in columns {
        if values.len() != labels.len() {
            return Err(Error::InvalidData(format!(
                "column {name}: {} values, {} labels",
                values.len(),
                labels.len()
            )));
        }
        let mut by_state: BTreeMap<&str, Vec<f64>> = states.iter().map(|s| (s.as_str(), Vec::new())).collect();
        for (v, l) in values.iter().zip(labels) {
            let bucket = by_state.entry(l.as_str()).or_default();
            if let Some(v) = v {
                bucket.push(*v);
            }
        }
        for (state, vals) in by_state {
            out.entry(state.to_string())
                .or_default()
                .insert(name.clone(), Summary::of(&vals));
        }
    }
    Ok(StateSummary(out))
}

impl StateSummary {
    pub fn get(&self, state: &str, column: &str) -> Option<&Summary> {
        self.0.get(state)?.get(column)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(format!("serializing summary: {e}")))
    }

    /// `state,column,count,mean,sd,min,q1,median,q3,max`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,column,count,mean,sd,min,q1,median,q3,max\n");
        for (state, cols) in &self.0 {
            for (col, s) in cols {
                out.push_str(&format!(
                    "{state},{col},{},{},{},{},{},{},{},{}\n",
                    s.count,
                    fmt_opt(s.mean),
                    fmt_opt(s.sd),
                    fmt_opt(s.min),
                    fmt_opt(s.q1),
                    fmt_opt(s.median),
                    fmt_opt(s.q3),
                    fmt_opt(s.max)
                ));
            }
        }
        out
    }

    pub fn write(&self, json_path: impl AsRef<Path>, csv_path: impl AsRef<Path>) -> Result<()> {
        write_file(json_path.as_ref(), &(self.to_json()? + "\n"))?;
        write_file(csv_path.as_ref(), &self.to_csv())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weekly(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
        let mut out = vec![from];
        while let Some(next) = out.last().map(|d| *d + chrono::Duration::weeks(1)).filter(|d| *d <= to) {
            out.push(next);
        }
        out
    }

    #[test]
    fn default_window_examples() {
        let w = StateWindows::default();
        assert_eq!(w.label_of(ymd(2010, 1, 15)), "SMC");
        assert_eq!(w.label_of(ymd(2005, 1, 7)), "N");
        assert_eq!(w.label_of(ymd(2016, 1, 1)), "I");
        assert_eq!(w.label_of(ymd(2018, 1, 5)), "FIC");
        // bounds are inclusive
        assert_eq!(w.label_of(ymd(2008, 2, 8)), "SMC");
        assert_eq!(w.label_of(ymd(2013, 3, 1)), "SMC");
        assert_eq!(w.label_of(ymd(2013, 3, 2)), "N");
        assert_eq!(w.labels(), vec!["N", "SMC", "I", "FIC"]);
    }

    #[test]
    fn partition_is_complete() {
        let w = StateWindows::default();
        let dates = weekly(ymd(2005, 1, 7), ymd(2019, 12, 20));
        let labels = classify(&dates, &w);
        let counts = state_counts(&labels, &w);
        assert_eq!(counts.values().sum::<usize>(), dates.len());
        assert!(counts.values().all(|&c| c > 0));
    }

    #[test]
    fn window_validation() {
        let w = |l: &str, a, b| StateWindow {
            label: l.into(),
            start: a,
            end: b,
        };
        assert!(StateWindows::new(vec![w("X", ymd(2010, 1, 2), ymd(2010, 1, 1))]).is_err());
        assert!(StateWindows::new(vec![w("N", ymd(2010, 1, 1), ymd(2010, 1, 2))]).is_err());
        let overlapping = vec![
            w("A", ymd(2010, 1, 1), ymd(2011, 1, 1)),
            w("B", ymd(2011, 1, 1), ymd(2012, 1, 1)),
        ];
        assert!(StateWindows::new(overlapping).is_err());
        let ok = StateWindows::new(vec![
            w("B", ymd(2012, 1, 1), ymd(2012, 6, 1)),
            w("A", ymd(2010, 1, 1), ymd(2011, 1, 1)),
        ])
        .unwrap();
        assert_eq!(ok.labels(), vec!["N", "A", "B"]);
    }

    fn col(name: &str, values: Vec<f64>, labels: &[&str]) -> (String, Vec<Option<f64>>, Vec<String>) {
        (
            name.into(),
            values.into_iter().map(Some).collect(),
            labels.iter().map(|s| s.to_string()).collect(),
        )
    }

    fn states() -> Vec<String> {
        StateWindows::default().labels()
    }

    #[test]
    fn summary_examples() {
        let s = state_summary(&[col("x", vec![2.0; 4], &["N", "SMC", "I", "FIC"])], &states()).unwrap();
        for st in states() {
            let sum = s.get(&st, "x").unwrap();
            assert_eq!(sum.mean, Some(2.0));
            assert_eq!(sum.count, 1);
        }
        let s = state_summary(&[col("x", vec![2.0, 2.0, 2.0], &["N"; 3])], &states()).unwrap();
        assert_eq!(s.get("N", "x").unwrap().sd, Some(0.0));

        let s = state_summary(&[col("x", vec![1.0, 3.0], &["SMC", "SMC"])], &states()).unwrap();
        let sum = s.get("SMC", "x").unwrap();
        assert_eq!(sum.mean, Some(2.0));
        assert!((sum.sd.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.get("N", "x").unwrap().count, 0);
        assert_eq!(s.get("FIC", "x").unwrap().mean, None);
    }

    #[test]
    fn quartiles_interpolate() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.q1, Some(1.75));
        assert_eq!(s.median, Some(2.5));
        assert_eq!(s.q3, Some(3.25));
        assert_eq!((s.min, s.max), (Some(1.0), Some(4.0)));
    }

    #[test]
    fn state_means_recombine_to_global_mean() {
        let w = StateWindows::default();
        let dates = weekly(ymd(2005, 1, 7), ymd(2019, 12, 20));
        let labels = classify(&dates, &w);
        let values: Vec<f64> = (0..dates.len()).map(|i| ((i * 7919) % 101) as f64 / 13.0).collect();
        let global = values.iter().sum::<f64>() / values.len() as f64;
        let column = ("v".to_string(), values.iter().copied().map(Some).collect(), labels);
        let s = state_summary(&[column], &w.labels()).unwrap();
        let recombined: f64 = w
            .labels()
            .iter()
            .map(|st| {
                let x = s.get(st, "v").unwrap();
                x.count as f64 * x.mean.unwrap_or(0.0)
            })
            .sum::<f64>()
            / values.len() as f64;
        assert!((recombined - global).abs() < 1e-10);
    }

    #[test]
    fn undefined_values_are_skipped() {
        let labels = vec!["N".to_string(); 3];
        let column = ("a".to_string(), vec![Some(1.0), None, Some(3.0)], labels);
        let s = state_summary(&[column], &states()).unwrap();
        assert_eq!(s.get("N", "a").unwrap().count, 2);
    }

    #[test]
    fn csv_and_json_render() {
        let s = state_summary(&[col("x", vec![1.0, 3.0], &["N", "N"])], &states()).unwrap();
        let csv = s.to_csv();
        assert!(csv.contains("N,x,2,2,1.41421356,1,1.5,2,2.5,3\n"));
        assert!(csv.contains("FIC,x,0,,,,,,,\n"));
        let json: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        assert_eq!(json["N"]["x"]["mean"], 2.0);
        assert!(json["I"]["x"]["mean"].is_null());
    }
}
