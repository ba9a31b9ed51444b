//! `dzip`: fit, forecast, backtest and simulate dynamic zero-inflated
//! Poisson models from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod config;

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use dzip::backtest::{run_backtest, BacktestPlan, BacktestReport, ReportFlavor, ReportRow};
use dzip::diagnostics::summarize;
use dzip::forecast::{ForecastSummary, PredictiveSet, COVERAGE_QUANTILES};
use dzip::io::{self, Outputs, RunMetadata};
use dzip::simulate::{simulate, GeneratorConfig, TrueInnovation};
use dzip::{run_chain, InnovationModel};

use config::{CommandKind, Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(dzip::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(
                dzip::Error::InvalidConfig(_)
                | dzip::Error::InvalidParameter(_)
                | dzip::Error::InvalidProbability(_)
                | dzip::Error::InvalidLogIntensity(_),
            ) => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) if e.is_numerical() => write!(f, "numerical failure: {e}"),
            CliError::Core(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<dzip::Error> for CliError {
    fn from(e: dzip::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "dzip", version, about = "Dynamic zero-inflated Poisson models for weekly count series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model and write fitted paths and a posterior summary.
    Fit(RunArgs),
    /// Fit one model and write the one-week-ahead predictive distribution.
    Forecast(RunArgs),
    /// Rolling-origin evaluation of one or more models.
    Backtest(RunArgs),
    /// Simulate a synthetic series with known latent truth.
    Simulate(RunArgs),
    /// Re-emit the tables of a saved `backtest.json` (given as --input).
    Report(RunArgs),
    /// Re-execute a run from its `metadata.json`.
    Replay {
        metadata: PathBuf,
        /// Write to this directory instead of the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` file; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input `week,count` CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// gaussian, student_t, mixture, sv, a comma-separated list, or all.
    #[arg(long, value_parser = parse_models_arg)]
    model: Option<ModelList>,
    #[arg(long)]
    burn: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    /// Number of rolling hold-out windows.
    #[arg(long)]
    windows: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the predictive distribution given an active gate.
    #[arg(long, conflicts_with = "unconditional")]
    conditional: bool,
    /// Use the zero-inflated predictive distribution.
    #[arg(long)]
    unconditional: bool,
    /// Also write SVG plots of the fitted paths.
    #[arg(long)]
    svg: bool,
    /// Series length for `simulate`.
    #[arg(long)]
    length: Option<usize>,
    /// Gate probability for `simulate`.
    #[arg(long)]
    pi: Option<f64>,
    /// Initial log-intensity for `simulate`.
    #[arg(long, allow_negative_numbers = true)]
    z0: Option<f64>,
    /// Worker threads for `backtest`.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Clone)]
struct ModelList(Vec<InnovationModel>);

fn parse_models_arg(s: &str) -> Result<ModelList, String> {
    config::parse_models(s).map(ModelList).map_err(|e| match e {
        CliError::Usage(m) => m,
        other => other.to_string(),
    })
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        let conditional = if self.conditional {
            Some(true)
        } else if self.unconditional {
            Some(false)
        } else {
            None
        };
        Overrides {
            input: self.input.clone(),
            models: self.model.clone().map(|m| m.0),
            burn: self.burn,
            draws: self.draws,
            windows: self.windows,
            seed: self.seed,
            out: self.out.clone(),
            conditional,
            svg: self.svg.then_some(true),
            length: self.length,
            pi: self.pi,
            z0: self.z0,
            threads: self.threads,
        }
    }

    fn resolve(&self, command: CommandKind) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => config::read_config_file(path)?,
            None => Overrides::default(),
        };
        let mut config = RunConfig::resolve(command, file.merge(self.overrides()))?;
        if let Some(input) = &config.input {
            config.input = Some(input.canonicalize().unwrap_or_else(|_| input.clone()));
        }
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => a.resolve(CommandKind::Fit).and_then(|c| execute(&c)),
        Command::Forecast(a) => a.resolve(CommandKind::Forecast).and_then(|c| execute(&c)),
        Command::Backtest(a) => a.resolve(CommandKind::Backtest).and_then(|c| execute(&c)),
        Command::Simulate(a) => a.resolve(CommandKind::Simulate).and_then(|c| execute(&c)),
        Command::Report(a) => a.resolve(CommandKind::Report).and_then(|c| execute(&c)),
        Command::Replay { metadata, out } => replay(metadata, out.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dzip: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn replay(path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let metadata: RunMetadata = io::read_json(path)?;
    let mut config: RunConfig = serde_json::from_value(metadata.run)
        .map_err(|e| CliError::Usage(format!("{} does not describe a run: {e}", path.display())))?;
    if let Some(out) = out {
        config.out = out;
    }
    execute(&config)
}

/// Run one resolved configuration and write its outputs.
fn execute(config: &RunConfig) -> Result<(), CliError> {
    io::prepare_output_dir(&config.out)?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut metadata = RunMetadata {
        tool_version: io::VERSION.to_string(),
        command: config.command.to_string(),
        run: serde_json::to_value(config).expect("run configuration serializes"),
        started_unix,
        wall_time_seconds: 0.0,
        outputs: Vec::new(),
    };
    let finish = |outputs: Outputs<'_>, metadata: &mut RunMetadata| -> Result<(), CliError> {
        metadata.wall_time_seconds = started.elapsed().as_secs_f64();
        let written = io::emit_report(&config.out, &outputs, metadata)?;
        println!("wrote {} files to {}", written.len(), config.out.display());
        Ok(())
    };

    match config.command {
        CommandKind::Fit => {
            let series = io::parse_csv(input(config))?;
            let store = run_chain(&series, &config.mcmc(config.model()))?;
            let rows = io::fitted_paths(&store, &series);
            let summary = summarize(&store);
            print!("{}", format_summary(&summary));
            finish(
                Outputs {
                    fitted: Some(&rows),
                    svg: config.svg,
                    summary: Some(&summary),
                    ..Outputs::default()
                },
                &mut metadata,
            )
        }
        CommandKind::Forecast => {
            let series = io::parse_csv(input(config))?;
            let mut mcmc = config.mcmc(config.model());
            mcmc.store_paths = config.svg;
            let store = run_chain(&series, &mcmc)?;
            let set = PredictiveSet::from_store(&store, config.conditional);
            let week = series.labels().last().expect("series is non-empty").next();
            let forecast = ForecastSummary::new(&set, week, &COVERAGE_QUANTILES);
            print!("{}", format_forecast(&forecast));
            let rows = config.svg.then(|| io::fitted_paths(&store, &series));
            finish(
                Outputs {
                    forecast: Some(&forecast),
                    fitted: rows.as_deref(),
                    svg: config.svg,
                    ..Outputs::default()
                },
                &mut metadata,
            )
        }
        CommandKind::Backtest => {
            let path = input(config);
            let series = io::parse_csv(path)?;
            let dataset = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "series".into());
            let mut mcmc = config.mcmc(config.models[0]);
            mcmc.store_paths = false;
            let mut plan = BacktestPlan::new(dataset, config.windows, mcmc);
            plan.variants = config.models.clone();
            plan.threads = config.threads;
            let report = run_backtest(&series, &plan)?;
            print!("{}", format_report(&report, flavor(config)));
            finish(
                Outputs {
                    backtest: Some(&report),
                    ..Outputs::default()
                },
                &mut metadata,
            )?;
            failures(&report)
        }
        CommandKind::Simulate => {
            let sim = simulate(&GeneratorConfig {
                n_obs: config.length,
                z0: config.z0,
                pi: config.pi,
                innovation: TrueInnovation::default_for(config.model()),
                seed: config.seed,
            })?;
            println!("simulated {} weeks ({} zeros)", sim.series.len(), sim.series.counts().iter().filter(|&&y| y == 0).count());
            finish(
                Outputs {
                    simulation: Some(&sim),
                    ..Outputs::default()
                },
                &mut metadata,
            )
        }
        CommandKind::Report => {
            let report: BacktestReport = io::read_json(input(config))?;
            print!("{}", format_report(&report, flavor(config)));
            finish(
                Outputs {
                    backtest: Some(&report),
                    ..Outputs::default()
                },
                &mut metadata,
            )?;
            failures(&report)
        }
    }
}

fn input(config: &RunConfig) -> &Path {
    config.input.as_deref().expect("validated: input is present")
}

fn flavor(config: &RunConfig) -> ReportFlavor {
    if config.conditional {
        ReportFlavor::Conditional
    } else {
        ReportFlavor::Full
    }
}

/// Cells whose chain failed turn an otherwise written report into a
/// numerical failure exit.
fn failures(report: &BacktestReport) -> Result<(), CliError> {
    match report.failures.first() {
        None => Ok(()),
        Some(first) => Err(CliError::Core(dzip::Error::Numerical {
            block: "backtest",
            iteration: 0,
            detail: format!(
                "{} of {} cells failed; first: {} window {}: {}",
                report.failures.len(),
                report.n_windows * report.conditional.len(),
                first.model,
                first.window,
                first.message
            ),
        })),
    }
}

fn format_summary(summary: &dzip::diagnostics::ChainSummary) -> String {
    let mut out = format!("{:<12} {:>10} {:>10} {:>10} {:>10} {:>8}\n", "parameter", "mean", "q05", "q95", "sd", "ess");
    for p in &summary.parameters {
        let _ = writeln!(out, "{:<12} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8.0}", p.name, p.mean, p.q05, p.q95, p.sd, p.ess);
    }
    if let Some(rate) = summary.acceptance.latent {
        let _ = writeln!(out, "latent acceptance {rate:.3}");
    }
    out
}

fn format_forecast(f: &ForecastSummary) -> String {
    let kind = if f.conditional { "conditional" } else { "unconditional" };
    let mut out = format!("{} {kind} predictive mean {:.2}\n", f.week, f.mean);
    for (q, v) in &f.quantiles {
        let _ = writeln!(out, "  q{:<4} {v}", q * 100.0);
    }
    out
}

fn format_report(report: &BacktestReport, flavor: ReportFlavor) -> String {
    let title = match flavor {
        ReportFlavor::Conditional => "positive hold-outs, conditional predictive",
        ReportFlavor::Full => "all hold-outs, zero-inflated predictive",
    };
    let mut out = format!("{}: {} windows, {title}\n", report.dataset, report.n_windows);
    let _ = write!(out, "{:<12} {:>10} {:>8} {:>8}", "model", "LPS", "RMSE", "Corr");
    for q in COVERAGE_QUANTILES {
        let _ = write!(out, " {:>6}", format!("q{}", q * 100.0));
    }
    out.push_str("      n\n");
    for row in report.rows(flavor) {
        out.push_str(&format_row(row));
    }
    out
}

fn format_row(row: &ReportRow) -> String {
    let corr = row.corr.map_or("-".to_string(), |c| format!("{c:.3}"));
    let mut line = format!("{:<12} {:>10.3} {:>8.3} {:>8}", row.model.label(), row.lps, row.rmse, corr);
    for c in &row.coverage {
        let _ = write!(line, " {c:>6.3}");
    }
    let _ = writeln!(line, " {:>6}{}", row.n, if row.complete { "" } else { " (incomplete)" });
    line
}
