//! End-to-end run: ingest, margins, pairwise copulas, trees and indicators,
//! CoVaR, market states, and the files written for each.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covar::{covar_frame, write_file, CoVarFrame, DEFAULT_Q};
use crate::depnet::{fit_pair_copula, tail_dep_tensor, CopulaFitOptions, PairDependence, TailDepTensor};
use crate::error::{Error, Result};
use crate::format::{fmt_num, fmt_opt};
use crate::graph::{build_tree_series, indicator_series, IndicatorFrame, TreeSeries, RCE_DEFAULT_K, SCALAR_COLUMNS};
use crate::ingest::{
    load_price_panel, load_return_panel, log_returns, moving_average_opt, LoadOptions, ReturnPanel, MIN_ROWS,
};
use crate::margins::{fit_arma_garch, MarginalFit};
use crate::states::{classify, state_summary, StateWindow, StateWindows};

pub const DEFAULT_SMOOTHING: usize = 13;
pub const DEFAULT_INDEX_TICKER: &str = "INDEX";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stages {
    pub graph: bool,
    pub covar: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages {
            graph: true,
            covar: true,
        }
    }
}

/// Optional intermediate outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dumps {
    pub margins: bool,
    pub pairs: bool,
    pub lambda: bool,
    /// One Graphviz file per date under `mst/`.
    pub dot: bool,
}

impl Default for Dumps {
    fn default() -> Self {
        Dumps {
            margins: true,
            pairs: true,
            lambda: true,
            dot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Input holds log returns rather than prices.
    pub returns: bool,
    pub date_column: String,
    pub min_rows: usize,
    /// System proxy for CoVaR; excluded from the trees.
    pub index_ticker: Option<String>,
    pub q: f64,
    pub rce_k: usize,
    pub smoothing_window: usize,
    pub states: Vec<StateWindow>,
    pub output_dir: PathBuf,
    /// Used by simulation modes.
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
    pub stages: Stages,
    pub dump: Dumps,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::from("prices.csv"),
            returns: false,
            date_column: "date".into(),
            min_rows: MIN_ROWS,
            index_ticker: Some(DEFAULT_INDEX_TICKER.into()),
            q: DEFAULT_Q,
            rce_k: RCE_DEFAULT_K,
            smoothing_window: DEFAULT_SMOOTHING,
            states: StateWindows::default().windows().to_vec(),
            output_dir: PathBuf::from("out"),
            seed: 42,
            threads: None,
            stages: Stages::default(),
            dump: Dumps::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 0.5) {
            return Err(Error::Config(format!("q = {} must be in (0, 0.5)", self.q)));
        }
        if self.rce_k < 1 {
            return Err(Error::Config("rce_k must be >= 1".into()));
        }
        if self.smoothing_window < 1 {
            return Err(Error::Config("smoothing_window must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        if self.stages.covar && self.index_ticker.is_none() {
            return Err(Error::Config("the covar stage needs index_ticker".into()));
        }
        if !self.stages.graph && !self.stages.covar {
            return Err(Error::Config("no stage enabled".into()));
        }
        self.windows()?;
        Ok(())
    }

    pub fn windows(&self) -> Result<StateWindows> {
        StateWindows::new(self.states.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Machine-readable summary of a run, written as `run_report.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub dropped_dates: Vec<String>,
    pub periods: usize,
    pub insurers: Vec<String>,
    pub index_ticker: Option<String>,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub convergence_failures: Vec<String>,
    pub outputs: Vec<String>,
}

/// A failed run: the error and the report up to the failing stage.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub report: Box<RunReport>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.report.failed_stage {
            Some(stage) => write!(f, "stage {stage} failed: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunFailure {}

/// Everything a completed run produced, kept in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub returns: ReturnPanel,
    pub margins: Vec<(String, MarginalFit)>,
    pub pairs: Vec<PairDependence>,
    pub tensor: Option<TailDepTensor>,
    pub trees: Option<TreeSeries>,
    pub indicators: Option<IndicatorFrame>,
    pub covar_pairs: Vec<PairDependence>,
    pub covar: Option<CoVarFrame>,
    pub labels: Vec<String>,
}

struct Runner {
    report: RunReport,
    out_dir: PathBuf,
}

impl Runner {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        log::info!("stage {name}");
        let result = f(self);
        self.report.stages.push(StageTiming {
            stage: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if result.is_err() {
            self.report.failed_stage = Some(name.into());
        }
        result
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_file(&self.out_dir.join(name), contents)?;
        self.report.outputs.push(name.into());
        Ok(())
    }

    fn finish(&mut self, error: Option<&Error>) {
        self.report.status = if error.is_some() { "failed" } else { "ok" }.into();
        self.report.error = error.map(|e| e.to_string());
        self.report.outputs.push("run_report.json".into());
        let json = serde_json::to_string_pretty(&self.report).unwrap_or_default();
        if let Err(e) = write_file(&self.out_dir.join("run_report.json"), &(json + "\n")) {
            log::error!("could not write run report: {e}");
        }
    }
}

/// Run every enabled stage and write the outputs to `config.output_dir`.
///
/// Per-pair copula fallbacks are reported as warnings. Any stage error
/// aborts the run; the partial report is still written.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutput, RunFailure> {
    let fail = |error: Error| RunFailure {
        error,
        report: Box::new(RunReport {
            status: "failed".into(),
            failed_stage: Some("config".into()),
            ..RunReport::default()
        }),
    };
    config.validate().map_err(fail)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| fail(Error::Config(format!("thread pool: {e}"))))?;
    std::fs::create_dir_all(&config.output_dir).map_err(|source| {
        fail(Error::Io {
            path: config.output_dir.clone(),
            source,
        })
    })?;

    let mut runner = Runner {
        report: RunReport::default(),
        out_dir: config.output_dir.clone(),
    };
    let result = pool.install(|| execute(config, &mut runner));
    match result {
        Ok(mut out) => {
            runner.finish(None);
            out.report = runner.report;
            Ok(out)
        }
        Err(error) => {
            runner.finish(Some(&error));
            Err(RunFailure {
                error,
                report: Box::new(runner.report),
            })
        }
    }
}

fn load_returns(config: &RunConfig, runner: &mut Runner) -> Result<ReturnPanel> {
    let opts = LoadOptions {
        date_column: config.date_column.clone(),
        min_rows: config.min_rows,
    };
    let (panel, drops) = if config.returns {
        load_return_panel(&config.input, &opts)?
    } else {
        let (prices, drops) = load_price_panel(&config.input, &opts)?;
        (log_returns(&prices), drops)
    };
    runner.report.rows_read = drops.rows_read;
    runner.report.rows_dropped = drops.rows_dropped;
    if drops.rows_dropped > 0 {
        runner.report.warnings.push(format!(
            "dropped {} rows with missing or invalid values",
            drops.rows_dropped
        ));
    }
    runner.report.dropped_dates = drops.dropped_dates;
    Ok(panel)
}

fn execute(config: &RunConfig, runner: &mut Runner) -> Result<RunOutput> {
    let returns = runner.stage("ingest", |r| load_returns(config, r))?;
    let windows = config.windows()?;
    let index = match &config.index_ticker {
        Some(t) if returns.ticker_index(t).is_some() => Some(t.clone()),
        Some(t) if config.stages.covar => {
            return Err(Error::Config(format!("index ticker {t} not found in the input panel")));
        }
        _ => None,
    };
    let insurers: Vec<String> = returns
        .tickers
        .iter()
        .filter(|t| Some(*t) != index.as_ref())
        .cloned()
        .collect();
    if insurers.len() < 2 {
        return Err(Error::InvalidData("need at least two non-index series".into()));
    }
    runner.report.insurers = insurers.clone();
    runner.report.index_ticker = index.clone();
    runner.report.periods = returns.dates.len();

    let fit_tickers: Vec<String> = if config.stages.covar {
        insurers.iter().cloned().chain(index.iter().cloned()).collect()
    } else {
        insurers.clone()
    };
    let margins = runner.stage("margins", |r| {
        let fits = fit_tickers
            .par_iter()
            .map(|t| {
                let col = returns.column(returns.ticker_index(t).expect("ticker from panel"));
                fit_arma_garch(&col).map_err(|e| Error::NonConvergence(format!("margin {t}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let margins: Vec<(String, MarginalFit)> = fit_tickers.iter().cloned().zip(fits).collect();
        if config.dump.margins {
            r.write("margins.csv", &margins_csv(&margins))?;
        }
        Ok(margins)
    })?;
    let pit_of = |t: &str| -> &[f64] { &margins.iter().find(|(n, _)| n == t).expect("fitted margin").1.pit };
    let dates = returns.dates.clone();
    let labels = classify(&dates, &windows);

    let mut out = RunOutput {
        report: RunReport::default(),
        returns: returns.clone(),
        margins: Vec::new(),
        pairs: Vec::new(),
        tensor: None,
        trees: None,
        indicators: None,
        covar_pairs: Vec::new(),
        covar: None,
        labels: labels.clone(),
    };

    if config.stages.graph {
        let pairs = runner.stage("depnet", |r| {
            let names: Vec<(usize, usize)> = (0..insurers.len())
                .flat_map(|i| (i + 1..insurers.len()).map(move |j| (i, j)))
                .collect();
            let pairs = fit_pairs(&names, &insurers, &insurers, &pit_of)?;
            note_pair_warnings(&pairs, &mut r.report);
            let tensor = tail_dep_tensor(&pairs, &insurers, &dates)?;
            if config.dump.pairs {
                r.write("pairs.csv", &pairs_csv(&pairs))?;
            }
            if config.dump.lambda {
                tensor.write_csv(r.out_dir.join("lambda.csv"))?;
                r.report.outputs.push("lambda.csv".into());
            }
            Ok((pairs, tensor))
        })?;
        let (trees, frame) = runner.stage("graph", |r| {
            graph_stage(
                &pairs.1,
                config.rce_k,
                config.smoothing_window,
                &labels,
                config.dump.dot,
                r,
            )
        })?;
        out.pairs = pairs.0;
        out.tensor = Some(pairs.1);
        out.trees = Some(trees);
        out.indicators = Some(frame);
    }

    if config.stages.covar {
        let index = index.clone().expect("checked above");
        let (covar_pairs, frame) = runner.stage("covar", |r| {
            let names: Vec<(usize, usize)> = (0..insurers.len()).map(|j| (0, j)).collect();
            let pairs = fit_pairs(&names, std::slice::from_ref(&index), &insurers, &pit_of)?;
            note_pair_warnings(&pairs, &mut r.report);
            let system = &margins.iter().find(|(n, _)| *n == index).expect("index margin").1;
            let frame = covar_frame(system, &pairs, dates.clone(), config.q)?;
            frame.write_csv(r.out_dir.join("covar.csv"))?;
            frame.write_means_csv(r.out_dir.join("covar_insurer_means.csv"))?;
            r.report
                .outputs
                .extend(["covar.csv".into(), "covar_insurer_means.csv".into()]);
            if config.dump.pairs {
                r.write("covar_pairs.csv", &pairs_csv(&pairs))?;
            }
            let mean = frame.mean_series().into_iter().map(Some).collect::<Vec<_>>();
            let smooth = moving_average_opt(&mean, config.smoothing_window);
            let mut csv = String::from("date,state,mean_delta_covar,mean_delta_covar_smoothed\n");
            for t in 0..dates.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    dates[t],
                    labels[t],
                    fmt_opt(mean[t]),
                    fmt_opt(smooth[t])
                );
            }
            r.write("covar_mean.csv", &csv)?;
            Ok((pairs, frame))
        })?;
        out.covar_pairs = covar_pairs;
        out.covar = Some(frame);
    }

    runner.stage("states", |r| {
        let mut csv = String::from("date,state\n");
        for (d, l) in dates.iter().zip(&labels) {
            let _ = writeln!(csv, "{d},{l}");
        }
        r.write("states.csv", &csv)?;
        let mut columns = Vec::new();
        if let Some(frame) = &out.indicators {
            columns.extend(indicator_columns(frame, &labels));
        }
        if let Some(frame) = &out.covar {
            columns.extend(covar_columns(frame, &labels));
        }
        let summary = state_summary(&columns, &windows.labels())?;
        summary.write(
            r.out_dir.join("state_summary.json"),
            r.out_dir.join("state_summary.csv"),
        )?;
        r.report
            .outputs
            .extend(["state_summary.json".into(), "state_summary.csv".into()]);
        Ok(())
    })?;

    out.margins = margins;
    Ok(out)
}

type Column = (String, Vec<Option<f64>>, Vec<String>);

fn indicator_columns(frame: &IndicatorFrame, labels: &[String]) -> Vec<Column> {
    SCALAR_COLUMNS
        .iter()
        .map(|c| (c.to_string(), frame.scalar(c).expect("known column"), labels.to_vec()))
        .collect()
}

fn covar_columns(frame: &CoVarFrame, labels: &[String]) -> Vec<Column> {
    let mean = frame.mean_series().into_iter().map(Some).collect();
    let mut pooled = Vec::new();
    let mut pooled_labels = Vec::new();
    for series in &frame.delta_covar {
        pooled.extend(series.iter().copied().map(Some));
        pooled_labels.extend(labels.iter().cloned());
    }
    vec![
        ("mean_delta_covar".into(), mean, labels.to_vec()),
        ("delta_covar".into(), pooled, pooled_labels),
    ]
}

/// Fit `(first[i], second[j])` for each index pair, in parallel.
fn fit_pairs<'a>(
    names: &[(usize, usize)],
    first: &[String],
    second: &[String],
    pit_of: &(dyn Fn(&str) -> &'a [f64] + Sync),
) -> Result<Vec<PairDependence>> {
    let opts = CopulaFitOptions::default();
    names
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&first[i], &second[j]);
            fit_pair_copula((a, b), pit_of(a), pit_of(b), &opts)
                .map_err(|e| Error::NonConvergence(format!("pair {a}/{b}: {e}")))
        })
        .collect()
}

fn note_pair_warnings(pairs: &[PairDependence], report: &mut RunReport) {
    for p in pairs {
        if let Some(msg) = &p.fallback {
            report.warnings.push(msg.clone());
            report.convergence_failures.push(format!("{}/{}", p.pair.0, p.pair.1));
        }
        if p.effectively_gaussian {
            report.warnings.push(format!(
                "{}/{}: copula shape at the upper bound, effectively Gaussian",
                p.pair.0, p.pair.1
            ));
        }
    }
}

/// Trees, indicators and their files from a tail-dependence tensor.
fn graph_stage(
    tensor: &TailDepTensor,
    rce_k: usize,
    window: usize,
    labels: &[String],
    dot: bool,
    r: &mut Runner,
) -> Result<(TreeSeries, IndicatorFrame)> {
    let trees = build_tree_series(tensor)?;
    let frame = indicator_series(&trees, rce_k)?;
    if frame.rows.iter().any(|row| row.strength_capped) {
        r.report
            .warnings
            .push("zero-length tree edges: vertex strength capped".into());
    }
    r.write("mst_edges.csv", &edges_csv(&trees))?;
    r.write("indicators.csv", &indicators_csv(&frame, labels, window))?;
    r.write("node_indicators.csv", &node_csv(&frame))?;
    r.write("node_means.csv", &node_means_csv(&frame))?;
    r.write("degree_distribution.csv", &degree_csv(&trees))?;
    if dot {
        let dir = r.out_dir.join("mst");
        std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        for (d, t) in trees.dates.iter().zip(&trees.trees) {
            let name = format!("mst/{d}.dot");
            r.write(&name, &t.to_dot(&d.to_string()))?;
        }
    }
    Ok((trees, frame))
}

/// Graph stage alone, from a tail-dependence tensor on disk.
pub fn run_indicators(
    lambda_path: impl AsRef<Path>,
    config: &RunConfig,
) -> Result<(IndicatorFrame, RunReport), RunFailure> {
    let lambda_path = lambda_path.as_ref();
    let fail = |error: Error, report: RunReport| RunFailure {
        error,
        report: Box::new(report),
    };
    config.validate().map_err(|e| fail(e, RunReport::default()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| fail(Error::Config(format!("thread pool: {e}")), RunReport::default()))?;
    std::fs::create_dir_all(&config.output_dir).map_err(|source| {
        fail(
            Error::Io {
                path: config.output_dir.clone(),
                source,
            },
            RunReport::default(),
        )
    })?;
    let mut runner = Runner {
        report: RunReport::default(),
        out_dir: config.output_dir.clone(),
    };
    let result = pool.install(|| -> Result<IndicatorFrame> {
        let windows = config.windows()?;
        let tensor = runner.stage("ingest", |_| TailDepTensor::read_csv(lambda_path))?;
        runner.report.insurers = tensor.tickers.clone();
        runner.report.periods = tensor.len();
        let labels = classify(&tensor.dates, &windows);
        let (_, frame) = runner.stage("graph", |r| {
            graph_stage(
                &tensor,
                config.rce_k,
                config.smoothing_window,
                &labels,
                config.dump.dot,
                r,
            )
        })?;
        runner.stage("states", |r| {
            let mut csv = String::from("date,state\n");
            for (d, l) in tensor.dates.iter().zip(&labels) {
                let _ = writeln!(csv, "{d},{l}");
            }
            r.write("states.csv", &csv)?;
            let summary = state_summary(&indicator_columns(&frame, &labels), &windows.labels())?;
            summary.write(
                r.out_dir.join("state_summary.json"),
                r.out_dir.join("state_summary.csv"),
            )?;
            r.report
                .outputs
                .extend(["state_summary.json".into(), "state_summary.csv".into()]);
            Ok(())
        })?;
        Ok(frame)
    });
    match result {
        Ok(frame) => {
            runner.finish(None);
            Ok((frame, runner.report))
        }
        Err(error) => {
            runner.finish(Some(&error));
            Err(fail(error, runner.report))
        }
    }
}

fn margins_csv(margins: &[(String, MarginalFit)]) -> String {
    let mut s = String::from("ticker,mu0,ar,ma,omega,alpha,beta,nu,xi,loglik,pit_ks\n");
    for (t, m) in margins {
        let p = &m.params;
        let vals = [
            p.mu0,
            p.ar,
            p.ma,
            p.omega,
            p.alpha,
            p.beta,
            p.nu,
            p.xi,
            m.loglik,
            m.pit_uniformity(),
        ];
        let _ = writeln!(s, "{t},{}", join(&vals));
    }
    s
}

fn pairs_csv(pairs: &[PairDependence]) -> String {
    let mut s = String::from("first,second,c,d,nu_cop,qbar,loglik,effectively_gaussian,fallback\n");
    for p in pairs {
        let q = &p.params;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            p.pair.0,
            p.pair.1,
            join(&[q.c, q.d, q.nu_cop, q.qbar, p.loglik]),
            p.effectively_gaussian,
            p.fallback.is_some()
        );
    }
    s
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
}

fn edges_csv(trees: &TreeSeries) -> String {
    let mut s = String::from("date,i,j,weight\n");
    for (d, t) in trees.dates.iter().zip(&trees.trees) {
        for e in t.edges() {
            let _ = writeln!(s, "{d},{},{},{}", t.nodes()[e.i], t.nodes()[e.j], fmt_num(e.weight));
        }
    }
    s
}

fn indicators_csv(frame: &IndicatorFrame, labels: &[String], window: usize) -> String {
    let mut s = String::from("date,state");
    let mut cols = Vec::new();
    for c in SCALAR_COLUMNS {
        let raw = frame.scalar(c).expect("known column");
        let smooth = moving_average_opt(&raw, window);
        let _ = write!(s, ",{c},{c}_smoothed");
        cols.push(raw);
        cols.push(smooth);
    }
    s.push('\n');
    for t in 0..frame.len() {
        let _ = write!(s, "{},{}", frame.dates[t], labels[t]);
        for c in &cols {
            let _ = write!(s, ",{}", fmt_opt(c[t]));
        }
        s.push('\n');
    }
    s
}

fn node_csv(frame: &IndicatorFrame) -> String {
    let mut s = String::from("date,ticker,degree,betweenness,strength,closeness\n");
    for (d, row) in frame.dates.iter().zip(&frame.rows) {
        for (v, ticker) in frame.tickers.iter().enumerate() {
            let _ = writeln!(
                s,
                "{d},{ticker},{},{},{},{}",
                row.degree[v],
                row.betweenness[v],
                fmt_num(row.strength[v]),
                fmt_num(row.closeness[v])
            );
        }
    }
    s
}

fn node_means_csv(frame: &IndicatorFrame) -> String {
    let mut s = String::from("ticker,degree,betweenness,strength,closeness\n");
    for m in frame.node_means() {
        let _ = writeln!(
            s,
            "{},{}",
            m.ticker,
            join(&[m.degree, m.betweenness, m.strength, m.closeness])
        );
    }
    s
}

fn degree_csv(trees: &TreeSeries) -> String {
    let mut s = String::from("date,degree,count,frequency\n");
    for (d, t) in trees.dates.iter().zip(&trees.trees) {
        for (deg, count) in crate::graph::degree_distribution(t) {
            let _ = writeln!(s, "{d},{deg},{count},{}", fmt_num(count as f64 / t.k() as f64));
        }
    }
    s
}
