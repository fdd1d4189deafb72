use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use png_lab::config::{self, Schema};
use png_lab::experiments::{execute, RunContext};
use png_lab::LabResult;

#[derive(Parser)]
#[command(
    name = "png-lab",
    version,
    about = "Seeded Monte Carlo experiments on the polynuclear growth model",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (flat key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// Master seed; every random draw derives from it
    #[arg(long)]
    seed: u64,
    /// Output directory for results.csv + manifest.json (created if missing)
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 keeps the global pool default
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also write plot_*.svg polyline plots of the result table
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run whichever experiment the config file names in its `experiment` key
    Run(RunArgs),
    /// Droplet height law at one point vs the exact determinantal CDF
    OnePoint(RunArgs),
    /// Height-fluctuation and transversal exponents over a scale grid
    Exponents(RunArgs),
    /// Height decorrelation between times T and T + T^tau
    SlowDecorrelation(RunArgs),
    /// Correlations along observation paths at matched effective separation
    Spacelike(RunArgs),
    /// Stationary increment law and centered-height scaling
    Stationary(RunArgs),
    /// Fourth-moment regularity of the smoothed multilayer statistic
    MomentBound(RunArgs),
    /// Poisson point count in the short-distance hyperbola cell
    ShortDistance(RunArgs),
}

impl Command {
    fn schema(&self) -> Option<&'static Schema> {
        match self {
            Command::Run(_) => None,
            Command::OnePoint(_) => Some(&config::ONE_POINT),
            Command::Exponents(_) => Some(&config::EXPONENTS),
            Command::SlowDecorrelation(_) => Some(&config::SLOW_DECORRELATION),
            Command::Spacelike(_) => Some(&config::SPACELIKE),
            Command::Stationary(_) => Some(&config::STATIONARY),
            Command::MomentBound(_) => Some(&config::MOMENT_BOUND),
            Command::ShortDistance(_) => Some(&config::SHORT_DISTANCE),
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Run(a)
            | Command::OnePoint(a)
            | Command::Exponents(a)
            | Command::SlowDecorrelation(a)
            | Command::Spacelike(a)
            | Command::Stationary(a)
            | Command::MomentBound(a)
            | Command::ShortDistance(a) => a,
        }
    }
}

fn run(cli: &Cli) -> LabResult<()> {
    let args = cli.command.args();
    let cfg = match cli.command.schema() {
        Some(schema) => config::load(&args.config, schema)?,
        None => config::load_dispatch(&args.config)?,
    };
    let ctx = RunContext {
        seed: args.seed,
        threads: args.threads,
        svg: args.svg,
    };
    let table = execute(&cfg, &ctx, &args.out)?;
    println!(
        "{}: {} rows -> {}",
        cfg.experiment(),
        table.n_rows(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
