use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vshare_cli::{run_pipeline, synth, write_report, Experiment, ExperimentConfig};
use vshare_core::io::{load_scenarios, write_scenarios};
use vshare_core::Error;

#[derive(Parser)]
#[command(name = "vshare", version, about = "Virtual storage sharing experiments")]
struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scenario CSV; overrides the configuration. Defaults to the built-in synthetic dataset.
    #[arg(long, global = true)]
    scenarios: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-user threshold prices and capacities.
    Thresholds,
    /// Aggregator profit over a price grid.
    Sweep,
    /// Optimal price search.
    OpPrice,
    /// Lowest nonnegative-profit price search.
    LnpPrice,
    /// Physical-storage benchmark costs.
    Benchmark,
    /// Peak reduction at the searched (or configured) price.
    PeakReport,
    /// Every experiment listed in the configuration.
    Run,
    /// Write the built-in synthetic dataset as scenario CSV.
    GenerateData {
        /// Destination file; stdout when omitted.
        path: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoViablePrice => 4,
        Error::Infeasible(_) | Error::Unbounded(_) | Error::UnboundedCapacity(_) | Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Dimension(_) => "dimension",
        Error::Domain(_) => "domain",
        Error::Precondition(_) => "precondition",
        Error::Infeasible(_) => "infeasible",
        Error::Unbounded(_) => "unbounded",
        Error::UnboundedCapacity(_) => "unbounded-capacity",
        Error::Numerical(_) => "numerical",
        Error::AmbiguousPrice { .. } => "ambiguous-price",
        Error::NoViablePrice => "no-viable-price",
        Error::Parse { .. } => "parse",
        Error::Validation(_) => "validation",
        Error::Io(_) => "io",
    }
}

fn run(cli: Cli) -> vshare_core::Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.scenarios {
        config.scenarios = Some(s);
    }
    if let Some(o) = cli.out {
        config.out_dir = o;
    }
    let experiments = match cli.command {
        Command::Thresholds => vec![Experiment::Thresholds],
        Command::Sweep => vec![Experiment::Sweep],
        Command::OpPrice => vec![Experiment::OpPrice],
        Command::LnpPrice => vec![Experiment::LnpPrice],
        Command::Benchmark => vec![Experiment::Benchmark],
        Command::PeakReport => vec![Experiment::PeakReport],
        Command::Run => config.experiments.clone(),
        Command::GenerateData { path } => {
            let set = synth::synthetic_dataset()?;
            return match path {
                Some(p) => write_scenarios(std::fs::File::create(p)?, &set),
                None => write_scenarios(std::io::stdout().lock(), &set),
            };
        }
    };
    config.validate()?;
    let set = match &config.scenarios {
        Some(path) => load_scenarios(path, config.slot_hours)?,
        None => synth::synthetic_dataset()?,
    };
    let report = run_pipeline(&config, set, &experiments)?;
    for path in write_report(&report, &config.out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": kind(&e), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::from(exit_code(&e))
        }
    }
}
