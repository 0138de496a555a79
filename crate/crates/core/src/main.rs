use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use specobs::config::{self, ConfigError, RunConfig, Scenario};
use specobs::scenario::run_scenario;
use specobs::Error;

/// Caps the worker pool; unset means one worker per core.
const THREADS_ENV: &str = "SPECOBS_THREADS";

const EXIT_VERDICT_FAILED: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;
const EXIT_SCHEMA: u8 = 5;
const EXIT_INVARIANT: u8 = 6;

#[derive(Parser)]
#[command(name = "specobs", version, about = "Spectral observability verification")]
struct Cli {
    #[command(subcommand)]
    scenario: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(clap::Args)]
struct Opts {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; the report goes to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long = "T", global = true)]
    t: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Structured)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    #[value(alias = "json")]
    Structured,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    VerifyCutoff,
    CoercivityScan,
    ResolventScan,
    WeakObservability,
    #[command(name = "assumption-i")]
    AssumptionI,
    #[command(name = "assumption-ii-iii")]
    AssumptionIiIii,
    Admissibility,
}

impl From<Command> for Scenario {
    fn from(c: Command) -> Self {
        match c {
            Command::VerifyCutoff => Scenario::VerifyCutoff,
            Command::CoercivityScan => Scenario::CoercivityScan,
            Command::ResolventScan => Scenario::ResolventScan,
            Command::WeakObservability => Scenario::WeakObservability,
            Command::AssumptionI => Scenario::AssumptionI,
            Command::AssumptionIiIii => Scenario::AssumptionIiIii,
            Command::Admissibility => Scenario::Admissibility,
        }
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let scenario = Scenario::from(cli.scenario);
    let mut cfg = match &cli.opts.config {
        Some(path) => config::load_config_file(path)?,
        None => RunConfig::default_for(scenario),
    };
    cfg.scenario = scenario;
    if let Some(seed) = cli.opts.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.opts.trials {
        if trials < 1 {
            return Err(ConfigError::Invariant("--trials must be ≥ 1".into()));
        }
        cfg.trials = trials;
    }
    if let Some(t) = cli.opts.t {
        if !(t > 0.0 && t.is_finite()) {
            return Err(ConfigError::Invariant(format!("--T must be positive, got {t}")));
        }
        cfg.t = Some(t);
    }
    if let Some(out) = &cli.opts.out {
        cfg.output_path = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => return fail(EXIT_INPUT, format!("{THREADS_ENV} must be a positive integer, got '{v}'")),
        }
    }
    let cfg = match resolve_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = match e {
                ConfigError::Io { .. } | ConfigError::Parse(_) => EXIT_INPUT,
                ConfigError::Schema(_) => EXIT_SCHEMA,
                ConfigError::Invariant(_) => EXIT_INVARIANT,
            };
            return fail(code, e);
        }
    };
    let bundle = match run_scenario(&cfg) {
        Ok(b) => b,
        Err(e) => {
            let code = match e.source {
                Error::InvalidSystem(_) | Error::Shape { .. } => EXIT_INPUT,
                _ => EXIT_NUMERIC,
            };
            return fail(code, e);
        }
    };
    let structured = matches!(cli.opts.format, Format::Structured);
    match &cfg.output_path {
        Some(dir) => {
            if let Err(e) = bundle.write_dir(std::path::Path::new(dir), structured) {
                return fail(EXIT_INPUT, format!("cannot write report to {dir}: {e}"));
            }
        }
        None if structured => print!("{}", bundle.to_json()),
        None => print!("{}", bundle.to_csv_stream()),
    }
    eprint!("{}", bundle.summary());
    if bundle.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERDICT_FAILED)
    }
}
