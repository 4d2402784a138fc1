use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stochavg::io::read_paths_csv;
use stochavg_cli::acceptance::{fresh_seed, run_acceptance, verdicts_json, PINNED_SEED};
use stochavg_cli::compare::{compare, CompareTest};
use stochavg_cli::config::{workers_from_env, ExperimentKind};
use stochavg_cli::run::{execute, output_dir, write_artifacts};
use stochavg_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "stochavg",
    version,
    about = "Stochastic averaging simulations and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a walker, BRWRE or SDE ensemble.
    Simulate(RunArgs),
    /// Compare two path CSV files per time and deme.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Comma-separated subset of mean, variance, ks.
        #[arg(long, value_delimiter = ',', default_value = "mean,variance,ks")]
        tests: Vec<CompareTest>,
        /// Write the verdicts here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate generator parts and averaged operators at given states.
    CheckGenerators(RunArgs),
    /// Estimate the averaging hypotheses along a list of scales.
    AveragingReport(RunArgs),
    /// Tabulate the closed-form oracles.
    Oracle(RunArgs),
    /// Run a verification suite.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML experiment config.
    config: PathBuf,
    /// Output directory, overriding `[output].dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Suite {
    /// The acceptance criteria.
    Acceptance {
        /// Write the JSON verdict list here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Draw a new base seed instead of the shipped one.
        #[arg(long)]
        fresh_seeds: bool,
        /// Run only these criteria (comma-separated ids).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

fn load(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ExperimentConfig::parse(&text)
}

fn run_config(args: &RunArgs, allowed: &[ExperimentKind]) -> CliResult<()> {
    let config = load(&args.config)?;
    if !allowed.contains(&config.kind) {
        let names: Vec<_> = allowed.iter().map(|k| k.name()).collect();
        return Err(CliError::config(
            "kind",
            format!(
                "'{}' is not handled by this subcommand (expected {})",
                config.kind.name(),
                names.join(" or ")
            ),
        ));
    }
    let artifacts = execute(&config)?;
    let dir = output_dir(&config, &args.config, args.out_dir.as_deref());
    for p in write_artifacts(&dir, &artifacts)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn read_ensemble(path: &Path) -> CliResult<stochavg::path::Ensemble> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_paths_csv(std::io::BufReader::new(file))
        .map(|t| t.ensemble)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => run_config(
            &args,
            &[
                ExperimentKind::Walker,
                ExperimentKind::Brwre,
                ExperimentKind::Sde,
            ],
        ),
        Command::CheckGenerators(args) => run_config(&args, &[ExperimentKind::GeneratorCheck]),
        Command::AveragingReport(args) => run_config(&args, &[ExperimentKind::AveragingReport]),
        Command::Oracle(args) => run_config(&args, &[ExperimentKind::Oracle]),
        Command::Compare { a, b, tests, out } => {
            let ea = read_ensemble(&a)?;
            let eb = read_ensemble(&b)?;
            let result = compare(&ea, &eb, &tests)?;
            eprintln!("{} of {} comparisons pass", result.passed, result.total);
            let doc = serde_json::json!({
                "a": a.display().to_string(),
                "b": b.display().to_string(),
                "passed": result.passed,
                "total": result.total,
                "verdicts": result.verdicts,
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
            text.push('\n');
            emit(out.as_deref(), &text)
        }
        Command::Verify {
            suite:
                Suite::Acceptance {
                    out,
                    workers,
                    fresh_seeds,
                    only,
                },
        } => {
            let workers = match workers {
                Some(0) => return Err(CliError::config("--workers", "must be at least 1")),
                Some(w) => Some(w),
                None => workers_from_env()?,
            };
            let seed = if fresh_seeds {
                fresh_seed()
            } else {
                PINNED_SEED
            };
            eprintln!("acceptance suite, base seed {seed}");
            let results = run_acceptance(seed, &only, workers, |r| eprintln!("{}", r.line()))?;
            emit(out.as_deref(), &verdicts_json(seed, &results))?;
            let failed = results.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                return Err(CliError::VerifyFailed {
                    failed,
                    total: results.len(),
                });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stochavg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
