//! `tailnet` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tailnet::ingest::{cumulative_prices, write_panel_csv};
use tailnet::pipeline::{run_indicators, run_pipeline, RunConfig, RunFailure};
use tailnet::simulate::{simulate_returns, ScenarioSpec};
use tailnet::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_STAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "tailnet", version)]
#[command(about = "Tail-dependence spanning trees, topology indicators and copula Delta-CoVaR")]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: margins, pair copulas, trees, indicators, Delta-CoVaR, state summaries
    Run(RunArgs),
    /// Generate a synthetic price (or return) panel
    Simulate(SimulateArgs),
    /// Trees and indicators only, from a tail-dependence file written by `run`
    Indicators(IndicatorArgs),
    /// Delta-CoVaR only
    Covar(RunArgs),
}

/// Settings shared by every stage. Unset flags fall back to the config
/// file, then to the built-in default shown in brackets.
#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML config file; flags override its values
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Output directory [default: out]
    #[arg(short, long)]
    output_dir: Option<PathBuf>,

    /// Rich-club degree threshold [default: 4]
    #[arg(long)]
    rce_k: Option<usize>,

    /// Trailing moving-average window for smoothed columns [default: 13]
    #[arg(long)]
    smoothing_window: Option<usize>,

    /// Worker threads [default: all cores]
    #[arg(long, env = "TAILNET_THREADS")]
    threads: Option<usize>,

    /// Also write one Graphviz file per tree under mst/
    #[arg(long)]
    dot: bool,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Input CSV with a date column and one column per ticker [default: prices.csv]
    #[arg(short, long)]
    input: Option<PathBuf>,

    /// The input holds log returns instead of prices
    #[arg(long)]
    returns: bool,

    /// Name of the date column [default: date]
    #[arg(long)]
    date_column: Option<String>,

    /// Column used as the system index for CoVaR [default: INDEX]
    #[arg(long)]
    index_ticker: Option<String>,

    /// CoVaR tail level, in (0, 0.5) [default: 0.05]
    #[arg(long)]
    q: Option<f64>,

    /// Skip the CoVaR stage
    #[arg(long)]
    no_covar: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario TOML [default: built-in 10-asset, 300-week scenario]
    #[arg(short, long)]
    scenario: Option<PathBuf>,

    /// Random seed
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Output CSV
    #[arg(short, long, default_value = "prices.csv")]
    output: PathBuf,

    /// Write log returns instead of prices
    #[arg(long)]
    returns: bool,

    /// Print the scenario as TOML and exit
    #[arg(long)]
    print_scenario: bool,
}

#[derive(Args)]
struct IndicatorArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Long-format tail-dependence CSV (date,i,j,lambda)
    #[arg(short, long)]
    lambda: PathBuf,
}

fn base_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &common.output_dir {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = common.rce_k {
        cfg.rce_k = v;
    }
    if let Some(v) = common.smoothing_window {
        cfg.smoothing_window = v;
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    if common.dot {
        cfg.dump.dot = true;
    }
    Ok(cfg)
}

fn run_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = base_config(&args.common)?;
    if let Some(v) = &args.input {
        cfg.input = v.clone();
    }
    if args.returns {
        cfg.returns = true;
    }
    if let Some(v) = &args.date_column {
        cfg.date_column = v.clone();
    }
    if let Some(v) = &args.index_ticker {
        cfg.index_ticker = Some(v.clone());
    }
    if let Some(v) = args.q {
        cfg.q = v;
    }
    if args.no_covar {
        cfg.stages.covar = false;
    }
    Ok(cfg)
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::Domain { .. } => EXIT_VALIDATION,
        _ => EXIT_STAGE,
    }
}

fn report_failure(f: &RunFailure) -> ExitCode {
    eprintln!("error: {f}");
    ExitCode::from(exit_code(&f.error))
}

fn report_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e))
}

fn cmd_run(args: &RunArgs, graph: bool) -> ExitCode {
    let mut cfg = match run_config(args) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    if !graph {
        cfg.stages.graph = false;
        cfg.stages.covar = true;
    }
    match run_pipeline(&cfg) {
        Ok(out) => {
            for w in &out.report.warnings {
                log::warn!("{w}");
            }
            println!(
                "{} periods, {} series; outputs in {}",
                out.report.periods,
                out.report.insurers.len(),
                cfg.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(f) => report_failure(&f),
    }
}

fn cmd_indicators(args: &IndicatorArgs) -> ExitCode {
    let cfg = match base_config(&args.common) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    match run_indicators(&args.lambda, &cfg) {
        Ok((frame, _)) => {
            println!("{} trees; outputs in {}", frame.len(), cfg.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(f) => report_failure(&f),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> ExitCode {
    let spec = match &args.scenario {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })
            .and_then(|text| ScenarioSpec::from_toml(&text)),
        None => Ok(ScenarioSpec::default()),
    };
    let spec = match spec {
        Ok(s) => s,
        Err(e) => return report_error(&e),
    };
    if args.print_scenario {
        match toml::to_string(&spec) {
            Ok(text) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            Err(e) => return report_error(&Error::Config(e.to_string())),
        }
    }
    let written = simulate_returns(&spec, args.seed).and_then(|returns| {
        if args.returns {
            write_panel_csv(&args.output, &returns.dates, &returns.tickers, &returns.values)
        } else {
            let prices = cumulative_prices(&returns, spec.start_date, 100.0)?;
            write_panel_csv(&args.output, &prices.dates, &prices.tickers, &prices.values)
        }
    });
    match written {
        Ok(()) => {
            println!("wrote {}", args.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => report_error(&e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match &cli.command {
        Command::Run(args) => cmd_run(args, true),
        Command::Covar(args) => cmd_run(args, false),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Indicators(args) => cmd_indicators(args),
    }
}
