use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geoprox_cli::output::to_json_line;
use geoprox_cli::{library, run_source, run_suite, RunOptions, Suite};

#[derive(Parser)]
#[command(name = "geoprox", version, about = "Bregman proximal point solver for bilevel equilibrium problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress progress output on stderr
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write trace.csv, summary.json and audit.json
    Run {
        /// Path to a TOML config, or the name of a library problem
        config: String,
        /// Output directory (default: output.dir from the config, else out/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Run a property suite and print one JSON line per property
    Suite {
        /// geometry, bregman, monotonicity, convergence or recovery
        name: Suite,
    },
    /// List the built-in problems
    ListProblems,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, max_iters } => {
            let src = match fs::read_to_string(&config) {
                Ok(s) => s,
                Err(e) => match library::find(&config) {
                    Some(entry) if !PathBuf::from(&config).exists() => entry.source.to_string(),
                    _ => {
                        eprintln!("error: cannot read {config}: {e}");
                        return ExitCode::from(2);
                    }
                },
            };
            let opts = RunOptions { out, seed, max_iters };
            match run_source(&src, &opts) {
                Ok(o) => {
                    if !cli.quiet {
                        let status = o.status.map(|s| format!("{s:?}")).unwrap_or_else(|| "error".into());
                        eprintln!(
                            "{}: status {status}, {} iterations, {:.3} s, artifacts in {}",
                            o.name,
                            o.summary["iterations"],
                            o.elapsed_secs,
                            o.out_dir.display()
                        );
                        if let Some(err) = o.solution_error {
                            eprintln!("distance to known solution {err:.3e} (tolerance {:.1e})", o.solution_tol);
                        }
                        if let Some(e) = o.summary.get("error").or_else(|| o.summary.get("failure")) {
                            eprintln!("failure: {}", e.as_str().unwrap_or_default());
                        }
                    }
                    if o.success {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {config}: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Suite { name } => {
            for row in run_suite(name) {
                println!("{}", to_json_line(&row));
            }
            ExitCode::SUCCESS
        }
        Command::ListProblems => {
            print!("{}", library::listing(library::LIBRARY));
            ExitCode::SUCCESS
        }
    }
}
