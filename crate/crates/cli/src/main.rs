use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skysim_cli::{presets, CliError, RunOptions, OUT_ENV};

#[derive(Parser)]
#[command(name = "skysim", version, about = "System-level LTE simulation with aerial UEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign spec file or a built-in preset.
    Run {
        spec: String,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (overrides SKYSIM_OUT and the spec).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a measurement trace against a measurement config.
    Replay {
        trace: PathBuf,
        meas_config: PathBuf,
        /// Write report_log.csv here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List or print built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { spec, seed, jobs, out } => {
            let (text, name) = skysim_cli::load_source(&spec)?;
            let opts = RunOptions {
                seed,
                jobs,
                out,
                env_out: env_out(),
            };
            let summary = skysim_cli::run(&text, &name, &opts)?;
            for note in &summary.notes {
                eprintln!("note: {note}");
            }
            println!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
        }
        Command::Replay { trace, meas_config, out } => {
            let log = skysim_cli::replay_files(&trace, &meas_config)?;
            match out.or_else(env_out) {
                Some(dir) => {
                    let mut a = skysim_cli::Artifacts::default();
                    a.add("report_log.csv", log);
                    a.write_to(&dir)?;
                }
                None => print!("{log}"),
            }
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for p in &presets::PRESETS {
                    println!("{:<10} {}", p.name, p.description);
                }
            }
            PresetAction::Show { name } => match presets::find(&name) {
                Some(p) => print!("{}", p.text),
                None => {
                    return Err(CliError::Validation(skysim_core::ConfigError::new(
                        "preset",
                        format!("unknown preset {name:?}"),
                    )))
                }
            },
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
