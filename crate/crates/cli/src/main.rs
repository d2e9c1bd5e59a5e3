mod commands;
mod manifest;
mod options;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use options::{FitOpts, IdentOpts, LossesOpts, RatesOpts, SelectOpts, SimulateOpts};

#[derive(Parser, Debug)]
#[command(
    name = "smoge",
    version,
    about = "Softmax-gated mixtures of Gaussian experts: simulation, fitting and experiments"
)]
struct Cli {
    /// TOML file with the subcommand's options (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "smoge-out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print numbers in CSV outputs with this many decimals instead of 17 significant digits.
    #[arg(long, global = true)]
    round: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a dataset from a generator.
    Simulate(SimulateOpts),
    /// Fit a K-expert model by variational inference.
    Fit(FitOpts),
    /// ELBO selection of the number of experts over replications.
    Select(SelectOpts),
    /// Loss-versus-n slopes or the Hellinger/Voronoi ratio scan.
    Rates(RatesOpts),
    /// Voronoi losses between two mixing-measure files.
    Losses(LossesOpts),
    /// Strong-identifiability rank test of an expert family.
    Identifiability(IdentOpts),
}

pub struct Context {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub round: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let ctx = Context {
        config: cli.config,
        out: cli.out,
        round: cli.round,
    };
    let started = chrono::Utc::now();
    let result = match cli.command {
        Command::Simulate(o) => commands::simulate(&ctx, o),
        Command::Fit(o) => commands::fit(&ctx, o),
        Command::Select(o) => commands::select(&ctx, o),
        Command::Rates(o) => commands::rates(&ctx, o),
        Command::Losses(o) => commands::losses(&ctx, o),
        Command::Identifiability(o) => commands::identifiability(&ctx, o),
    };
    match result {
        Ok(outcome) => {
            let code = if outcome.numerical_failure.is_some() { 2 } else { 0 };
            if let Some(msg) = &outcome.numerical_failure {
                eprintln!("numerical failure: {msg}");
            }
            match manifest::write(&ctx, &outcome, started, code) {
                Ok(path) => eprintln!("manifest: {}", path.display()),
                Err(e) => {
                    eprintln!("error: could not write manifest: {e:#}");
                    return ExitCode::from(1);
                }
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
