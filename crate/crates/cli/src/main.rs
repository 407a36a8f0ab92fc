use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afmc_cli::presets::preset_description;
use afmc_cli::{preset, preset_names, run_experiment, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "afmc", version, about = "Additive functionals of Markov chains: simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML (or JSON) config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a pinned preset.
    Preset {
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List the available presets.
    ListPresets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListPresets => {
            for name in preset_names() {
                println!("{name:<16} {}", preset_description(name).unwrap_or_default());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            seed,
            workers,
        } => match ExperimentConfig::from_file(&config) {
            Ok(c) => execute(c, &out, seed, workers),
            Err(e) => fail(1, &e.to_string()),
        },
        Command::Preset {
            name,
            out,
            seed,
            workers,
        } => match preset(&name) {
            Ok(c) => execute(c, &out, seed, workers),
            Err(e) => fail(1, &e.to_string()),
        },
    }
}

fn execute(mut config: ExperimentConfig, out: &Path, seed: Option<u64>, workers: Option<usize>) -> ExitCode {
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(w) = workers {
        config.workers = w;
    }
    match run_experiment(&config, out) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let verdict = if outcome.pass { "PASS" } else { "FAIL" };
            println!("{verdict} {} ({:.1} s)", out.display(), outcome.manifest.wall_time_seconds);
            for (file, digest) in &outcome.manifest.outputs {
                println!("  {file} sha256:{digest}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => fail(e.exit_code(), &e.to_string()),
    }
}

fn fail(code: i32, message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code as u8)
}
