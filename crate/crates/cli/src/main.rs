use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evapsim_cli::config::{parse_config, parse_config_str, ConfigError, ExperimentSpec};
use evapsim_cli::manifest::Status;
use evapsim_cli::{execute, presets};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "evapsim", version, about = "Evaporative cooling of reactive molecules: MC and kinetic-theory runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunOpts {
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "EVAPSIM_WORKERS", value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check a config and print it fully resolved, in SI units.
    Validate { config: PathBuf },
    /// Run a built-in config, or list them.
    Preset {
        name: Option<String>,
        /// List the presets.
        #[arg(long)]
        list: bool,
        /// Print the preset's TOML instead of running it.
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        opts: RunOpts,
    },
}

fn config_failure(e: &ConfigError, origin: &str) -> ExitCode {
    eprintln!("error: {origin}: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn apply(spec: &mut ExperimentSpec, opts: &RunOpts, out: Option<PathBuf>) {
    if let Some(seed) = opts.seed {
        spec.reseed(seed);
    }
    if let Some(o) = out {
        spec.output = o;
    }
}

fn workers(opts: &RunOpts) -> usize {
    opts.workers
        .map_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()), usize::from)
}

fn launch(spec: &ExperimentSpec, config: Option<&Path>, opts: &RunOpts) -> ExitCode {
    match execute(spec, config, workers(opts)) {
        Ok(m) => {
            let out = spec.output.display();
            match m.status {
                Status::Complete => {
                    println!("{} files written to {out}", m.files.len());
                    ExitCode::SUCCESS
                }
                _ => {
                    for f in &m.failures {
                        eprintln!("failed: {f}");
                    }
                    eprintln!("partial results in {out}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, opts } => {
            let mut spec = match parse_config(&config) {
                Ok(s) => s,
                Err(e) => return config_failure(&e, &config.display().to_string()),
            };
            apply(&mut spec, &opts, opts.out.clone());
            launch(&spec, Some(&config), &opts)
        }
        Command::Validate { config } => match parse_config(&config) {
            Ok(spec) => {
                println!("{}", serde_json::to_string_pretty(&spec).expect("spec serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => config_failure(&e, &config.display().to_string()),
        },
        Command::Preset { name, list, print, opts } => {
            let Some(name) = name.filter(|_| !list) else {
                for p in presets::PRESETS {
                    println!("{:<16} {}", p.name, p.about);
                }
                return ExitCode::SUCCESS;
            };
            let Some(preset) = presets::find(&name) else {
                eprintln!("error: no preset named `{name}` (see `evapsim preset --list`)");
                return ExitCode::from(EXIT_CONFIG);
            };
            if print {
                for (sub, src) in preset.parts {
                    if !sub.is_empty() {
                        println!("# --- {sub} ---");
                    }
                    print!("{src}");
                }
                return ExitCode::SUCCESS;
            }
            let root = opts.out.clone().unwrap_or_else(|| Path::new("runs").join(preset.name));
            for (sub, src) in preset.parts {
                let mut spec = match parse_config_str(src, Path::new(".")) {
                    Ok(s) => s,
                    Err(e) => return config_failure(&e, &format!("preset {name}")),
                };
                apply(&mut spec, &opts, Some(root.join(sub)));
                let code = launch(&spec, None, &opts);
                if code != ExitCode::SUCCESS {
                    return code;
                }
            }
            ExitCode::SUCCESS
        }
    }
}
