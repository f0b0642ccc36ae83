use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bvmax::report::{self, Hooks, Preset, RunConfig, RunOptions};

/// Output directory override; takes precedence over config files, not over `--out`.
const OUT_ENV: &str = "BVMAX_OUT";

#[derive(Parser)]
#[command(name = "bvmax", version, about = "Numerical checks for the second Malliavin derivative of the Brownian maximum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiments of a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Merge run manifests into a consolidated CSV and plot-data series.
    Report {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification preset.
    Verify {
        #[arg(long, default_value = "quick")]
        preset: Preset,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn out_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or(config)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> bvmax::Result<bool> {
    match cli.command {
        Command::Run { config, out, seed, workers } => {
            let cfg = RunConfig::load(&config)?;
            let opts = RunOptions {
                out_dir: out_dir(out, cfg.out.clone()),
                seed,
                workers,
            };
            let outcome = report::run(&cfg, &opts, &Hooks::default())?;
            for r in outcome.failures() {
                eprintln!("FAIL {}", r.describe());
            }
            println!(
                "{} rows, manifest {}",
                outcome.manifest.rows.len(),
                outcome.manifest_path.display()
            );
            Ok(outcome.all_pass())
        }
        Command::Report { manifests, out } => {
            let summary = report::report(&manifests, &out_dir(out, None))?;
            println!("merged {} manifests into {} rows", summary.manifests, summary.rows.len());
            for f in &summary.files {
                println!("{}", f.display());
            }
            Ok(true)
        }
        Command::Verify { preset, out, seed, workers } => {
            let opts = RunOptions {
                out_dir: out_dir(out, None),
                seed,
                workers,
            };
            let report = report::verify(preset, &opts, &Hooks::default(), |o| println!("{o}"))?;
            println!("manifest {}", report.manifest_path.display());
            Ok(report.all_pass())
        }
    }
}
