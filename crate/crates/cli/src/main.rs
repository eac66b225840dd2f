use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use koopman_pssd_cli::config::ExperimentConfig;
use koopman_pssd_cli::error::{CliError, EXIT_NO_TERMINATION, EXIT_OK};
use koopman_pssd_cli::experiment::{compare_speedup, run_experiment, run_sweep};
use koopman_pssd_cli::output::{write_compare, write_run, write_sweep};

#[derive(Parser)]
#[command(name = "koopman-pssd", version, about = "Koopman-invariant subspace identification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's, else `out/<name>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the full-scale sampling block.
    #[arg(long, global = true)]
    full: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One identification run with eigenpairs and prediction errors.
    Run,
    /// Consensus rounds across drop probabilities and seeds.
    Sweep,
    /// Operation counts of the parallel run for several agent counts.
    Compare,
    /// Check a config against the schema and cross-field rules.
    Validate,
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let dir = cli.out.clone().unwrap_or_else(|| config.output_dir());
    let mut code = EXIT_OK;
    let written = match cli.command {
        Command::Validate => {
            println!("{}", serde_json::json!({ "valid": true, "name": config.name }));
            return Ok(EXIT_OK);
        }
        Command::Run => write_run(&dir, &run_experiment(&config, cli.full)?)?,
        Command::Sweep => {
            let (report, timing) = run_sweep(&config, cli.full)?;
            if report.unreached() > 0 {
                code = EXIT_NO_TERMINATION;
            }
            write_sweep(&dir, &report, &timing)?
        }
        Command::Compare => {
            let (report, timing) = compare_speedup(&config, cli.full)?;
            write_compare(&dir, &report, &timing)?
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            let report = e.report();
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            report.exit_code
        }
    };
    ExitCode::from(code as u8)
}
