use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recomb_cli::config::{Experiment, RunConfig};
use recomb_cli::experiments::run_experiment;
use recomb_cli::output::{format_number, write_artifacts};

#[derive(Parser)]
#[command(name = "recomb", version, about = "Two-species kinetic recombination experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampling seed, overrides `output.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Nonlinear kinetic run with entropy and envelope diagnostics.
    Simulate(RunArgs),
    /// Linearized flow with modified entropy functionals.
    LinearDecay(RunArgs),
    /// Sampled and dense checks of the hypocoercivity hypotheses.
    CoercivityCheck(RunArgs),
    /// Kinetic runs over an epsilon sweep against the diffusion limit.
    LimitStudy(RunArgs),
    /// Moments and small-velocity slab behaviour of the profiles.
    ProfileCheck(RunArgs),
    /// Print the resolved config or the list of errors.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(path: &PathBuf, experiment: Option<Experiment>, seed: Option<u64>) -> Result<RunConfig, ExitCode> {
    RunConfig::load(path)
        .and_then(|c| c.resolve(experiment, seed))
        .map_err(|errors| {
            eprint!("{errors}");
            ExitCode::from(EXIT_CONFIG)
        })
}

fn run(experiment: Experiment, args: RunArgs) -> ExitCode {
    let config = match load(&args.config, Some(experiment), args.seed) {
        Ok(c) => c,
        Err(code) => return code,
    };
    // --out is not part of the resolved config, so the hash does not depend on it
    let dir = args.out.unwrap_or_else(|| PathBuf::from(&config.output.directory));
    let outcome = match run_experiment(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    };
    if let Err(e) = write_artifacts(&dir, &config, &outcome) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(EXIT_FAIL);
    }
    for check in &outcome.checks {
        let status = if check.passed { "pass" } else { "FAIL" };
        println!("{status} {} = {}", check.name, format_number(check.value));
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate(a) => run(Experiment::Simulate, a),
        Command::LinearDecay(a) => run(Experiment::LinearDecay, a),
        Command::CoercivityCheck(a) => run(Experiment::CoercivityCheck, a),
        Command::LimitStudy(a) => run(Experiment::LimitStudy, a),
        Command::ProfileCheck(a) => run(Experiment::ProfileCheck, a),
        Command::Validate { config } => match load(&config, None, None) {
            Ok(c) => {
                print!("{}", c.to_toml());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
    }
}
