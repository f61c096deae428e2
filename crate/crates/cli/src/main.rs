use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actstab_cli::{list_models, run, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "actstab", version, about = "Shadowing and stability experiments for group actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; exits 0 iff every check passes.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `out` in the config, else ./out/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for sample-level parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the built-in models.
    ListModels {
        #[arg(long)]
        json: bool,
    },
    /// Parse, resolve and print a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, actstab_cli::RunError> {
    let mut c = ExperimentConfig::load(path)?;
    if seed.is_some() {
        c.seed = seed;
    }
    c.resolve()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListModels { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(&actstab::models::catalog()).unwrap());
            } else {
                print!("{}", list_models());
            }
            ExitCode::SUCCESS
        }
        Command::ValidateConfig { config, seed } => match load(&config, seed) {
            Ok(c) => {
                print!("{}", c.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, out, seed, jobs } => {
            if let Some(n) = jobs {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            let c = match load(&config, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let dir = out
                .or_else(|| c.out.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out").join(c.experiment.name()));
            match run(&c, &dir) {
                Ok(s) => {
                    for check in &s.outcome.checks {
                        let mark = if check.passed { "PASS" } else { "FAIL" };
                        println!("{mark}  {}  {}", check.name, check.detail);
                    }
                    println!("wrote {} and {}", s.summary_path.display(), s.detail_path.display());
                    if s.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
