use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eptraj_cli::{run_file, validate_text, RunOptions};

#[derive(Parser)]
#[command(
    name = "eptraj",
    version,
    about = "Reduced trajectory planning on SO(3) and S²"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for output files [default: out/<scenario name>]
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Reserved; runs are deterministic and use no random numbers
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print errors only
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write trajectory, diagnostics and summary files
    Run { scenario: PathBuf },
    /// Check a scenario without running it
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario } => {
            let stem = scenario
                .file_stem()
                .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
            let opts = RunOptions {
                output_dir: cli
                    .output_dir
                    .unwrap_or_else(|| PathBuf::from("out").join(stem)),
                seed: cli.seed,
            };
            match run_file(&scenario, &opts) {
                Ok(outcome) => {
                    if outcome.exit_code != 0 {
                        eprintln!("{}", outcome.message);
                    } else if !cli.quiet {
                        println!("{}", outcome.message);
                        for f in &outcome.files {
                            println!("wrote {}", f.display());
                        }
                    }
                    ExitCode::from(outcome.exit_code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Validate { scenario } => {
            let text = match std::fs::read_to_string(&scenario) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", scenario.display());
                    return ExitCode::from(1);
                }
            };
            let findings = validate_text(&text);
            for f in &findings {
                println!("{f}");
            }
            if findings.is_empty() {
                if !cli.quiet {
                    println!("{}: ok", scenario.display());
                }
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
