mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{Context, Figure};
use config::{ModeName, ScenarioConfig, SchemeName};
use output::OutputDir;

const OUT_DIR_ENV: &str = "GEOSNAP_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<geosnap::Error> for CliError {
    fn from(e: geosnap::Error) -> Self {
        match e {
            geosnap::Error::Domain(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

/// Geometric SNAP gate simulation and figure datasets.
#[derive(Debug, Parser)]
#[command(name = "geosnap", version)]
struct Cli {
    /// Scenario file (TOML). Defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the environment and the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    mode: Option<ModeName>,
    #[arg(long, global = true)]
    scheme: Option<SchemeName>,
    #[arg(long, global = true)]
    optimize: Option<OnOff>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fidelity report, error budget and Bloch trajectories at one operating point.
    Simulate,
    /// Dataset behind one figure.
    Figure {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Amplitude or robustness sweep as configured under [sweep].
    Sweep,
    /// Linear amplitude/detuning adjustment at one operating point.
    Optimize,
    /// Correlation matrices of the generalized Rabi frequencies.
    Correlate,
}

fn resolve(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(m) = cli.mode {
        cfg.run.mode = m;
    }
    if let Some(s) = cli.scheme {
        cfg.run.scheme = s;
    }
    if let Some(o) = cli.optimize {
        cfg.run.optimize = o == OnOff::On;
    }
    if let Some(d) = &cli.out {
        cfg.run.output_dir = d.display().to_string();
    } else if let Ok(d) = std::env::var(OUT_DIR_ENV) {
        if !d.is_empty() {
            cfg.run.output_dir = d;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let cfg = resolve(&cli)?;
    let mut out = OutputDir::create(cfg.output_dir())?;
    let ctx = Context::new(cfg)?;
    let (name, fig) = match cli.command {
        Command::Simulate => ("simulate", None),
        Command::Figure { figure } => ("figure", Some(figure)),
        Command::Sweep => ("sweep", None),
        Command::Optimize => ("optimize", None),
        Command::Correlate => ("correlate", None),
    };
    match cli.command {
        Command::Simulate => commands::simulate(&ctx, &mut out)?,
        Command::Figure { figure } => commands::figure(&ctx, &mut out, figure)?,
        Command::Sweep => commands::sweep(&ctx, &mut out)?,
        Command::Optimize => commands::optimize(&ctx, &mut out)?,
        Command::Correlate => commands::correlate(&ctx, &mut out)?,
    }
    let fig_name = fig.map(|f| f.to_possible_value().expect("named").get_name().to_string());
    ctx.finish(&mut out, name, fig_name.as_deref())?;
    for f in out.files() {
        println!("{}", ctx.cfg.output_dir().join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geosnap: {e}");
            ExitCode::from(e.code())
        }
    }
}
