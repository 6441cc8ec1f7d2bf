use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mdkk::driver::{bench_saturation, parse_sizes, write_csv, BenchOptions, Session, StyleRegistry};

#[derive(Parser)]
#[command(name = "mdkk", version, about = "Short-range molecular dynamics kernels")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute an input script.
    Run { script: PathBuf },
    /// Measure throughput (atom-steps/s) over system sizes.
    Bench {
        /// Style name, e.g. lj/cut, lj/cut/opt or snap.
        potential: String,
        /// Comma-separated ascending atom counts.
        #[arg(long, default_value = "1000,8000,64000")]
        sizes: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// CSV output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Global style suffix.
        #[arg(long)]
        suffix: Option<String>,
    },
}

fn threads_from_env() -> Result<(), String> {
    let Ok(v) = std::env::var("MDKK_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("MDKK_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn real_main() -> Result<(), String> {
    let cli = Cli::parse();
    threads_from_env()?;
    match cli.command {
        Cmd::Run { script } => {
            let stdout = std::io::stdout().lock();
            Session::run_file(stdout, &script).map_err(|e| format!("{}: {e}", script.display()))?;
        }
        Cmd::Bench { potential, sizes, reps, out, suffix } => {
            let sizes = parse_sizes(&sizes).map_err(|e| e.to_string())?;
            let mut registry = StyleRegistry::with_builtin();
            registry.global_suffix = suffix;
            let rows = bench_saturation(&registry, &potential, &sizes, reps, &BenchOptions::default()).map_err(|e| e.to_string())?;
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                    write_csv(&rows, f).map_err(|e| e.to_string())?;
                }
                None => write_csv(&rows, std::io::stdout().lock()).map_err(|e| e.to_string())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("mdkk: error: {msg}");
            ExitCode::FAILURE
        }
    }
}
