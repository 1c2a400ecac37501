//! `dwig`: simulate deformed Wigner outliers, sample the reference law,
//! compare the two and run the invariant checks.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::{runtime, CliResult};

#[derive(Debug, Parser)]
#[command(name = "dwig", version, about = "Outliers of deformed Wigner matrices: simulation, reference law, comparison")]
struct Cli {
    /// Worker threads for trial-parallel runs (results do not depend on it).
    #[arg(long, global = true, env = "DWIG_THREADS")]
    threads: Option<usize>,
    /// Overrides `montecarlo.master_seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample deformed matrices and write the rescaled outliers.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the reference law and write its draws and covariance.
    Reference {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a simulation directory against a reference directory.
    Compare {
        #[arg(long)]
        sim: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suites (exit 1 if any fails).
    Check {
        /// Run a single suite.
        #[arg(long)]
        suite: Option<String>,
        /// Inject a named fault to confirm that the suites catch it.
        #[arg(long, hide = true)]
        mutate: Option<String>,
    },
}

fn run(cli: Cli) -> CliResult<bool> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t.max(1));
    }
    let pool = pool.build().map_err(runtime)?;
    pool.install(|| match &cli.command {
        Command::Simulate { config, out } => commands::simulate(config, out, cli.seed).map(|_| true),
        Command::Reference { config, out } => commands::reference(config, out, cli.seed).map(|_| true),
        Command::Compare { sim, reference, out } => commands::compare_dirs(sim, reference, out).map(|_| true),
        Command::Check { suite, mutate } => commands::check(suite.as_deref(), mutate.as_deref()),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
