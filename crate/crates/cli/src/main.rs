mod config;
mod plotdata;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ExperimentFile;
use crate::plotdata::Figure;

const EXIT_VALIDATION: u8 = 1;
const EXIT_COMPUTE: u8 = 2;
const EXIT_PROPS: u8 = 3;

#[derive(Parser)]
#[command(
    name = "taskred",
    about = "Task reductions and relative complexity: exact checks on finite tasks, adversarial estimation on neural-policy tasks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment config and persist records, curves, and
    /// checkpoints under its output directory.
    Run {
        config: PathBuf,
        /// Override config keys before validation, e.g. --set estimator.alpha=10
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Override the output directory (also honors TASKRED_OUTPUT_DIR).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Parse and validate a config without computing anything.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Aggregate result files into figure-shaped CSV on stdout (or --out).
    PlotData {
        /// fig2 (complexity vs alpha), fig3 (vs model depth), fig4-style
        /// (per target speed).
        figure: String,
        /// results.jsonl files.
        files: Vec<PathBuf>,
        /// Comma-separated labels, one per file (default: file stems).
        #[arg(long)]
        labels: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full invariant suites of all modules.
    Props,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, set, output_dir } => {
            let (file, canonical) = match ExperimentFile::load(&config, &set) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("validation error: {e:#}");
                    return ExitCode::from(EXIT_VALIDATION);
                }
            };
            let env_dir = std::env::var_os("TASKRED_OUTPUT_DIR").map(PathBuf::from);
            let out_dir = output_dir.or(env_dir);
            match runner::run(&file, &canonical, out_dir.as_deref()) {
                Ok(report) => {
                    println!(
                        "wrote {} records to {}",
                        report.n_records,
                        report.records_path.display()
                    );
                    if report.had_compute_errors {
                        eprintln!("some records are compute-error entries");
                        ExitCode::from(EXIT_COMPUTE)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("compute error: {e:#}");
                    ExitCode::from(EXIT_COMPUTE)
                }
            }
        }
        Command::Validate { config, set } => match ExperimentFile::load(&config, &set) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("validation error: {e:#}");
                ExitCode::from(EXIT_VALIDATION)
            }
        },
        Command::PlotData { figure, files, labels, out } => {
            let figure: Figure = match figure.parse() {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("validation error: {e:#}");
                    return ExitCode::from(EXIT_VALIDATION);
                }
            };
            if files.is_empty() {
                eprintln!("validation error: no result files given");
                return ExitCode::from(EXIT_VALIDATION);
            }
            let labels: Vec<String> = match labels {
                Some(s) => s.split(',').map(str::to_string).collect(),
                None => files
                    .iter()
                    .map(|f| {
                        f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(
                            || f.display().to_string(),
                        )
                    })
                    .collect(),
            };
            if labels.len() != files.len() {
                eprintln!("validation error: {} labels for {} files", labels.len(), files.len());
                return ExitCode::from(EXIT_VALIDATION);
            }
            let pairs: Vec<(String, &std::path::Path)> =
                labels.into_iter().zip(files.iter().map(PathBuf::as_path)).collect();
            match plotdata::emit(figure, &pairs) {
                Ok((csv, warnings)) => {
                    for w in warnings {
                        eprintln!("warning: {w}");
                    }
                    match out {
                        Some(path) => {
                            if let Err(e) = std::fs::write(&path, csv) {
                                eprintln!("compute error: writing {}: {e}", path.display());
                                return ExitCode::from(EXIT_COMPUTE);
                            }
                        }
                        None => print!("{csv}"),
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("validation error: {e:#}");
                    ExitCode::from(EXIT_VALIDATION)
                }
            }
        }
        Command::Props => {
            let checks = taskred_core::props::run_all();
            let mut failed = 0;
            for c in &checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                println!("[{status}] {} — {}", c.name, c.detail);
                if !c.passed {
                    failed += 1;
                }
            }
            println!("{} of {} checks passed", checks.len() - failed, checks.len());
            if failed > 0 {
                ExitCode::from(EXIT_PROPS)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
