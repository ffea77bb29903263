use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use lanekeep::cli::{self, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "lanekeep",
    version,
    about = "Lane detection, tracking and closed-loop lane keeping"
)]
struct Args {
    /// Flat `key = value` configuration applied over the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path: directory for `detect`, telemetry CSV for `simulate`,
    /// report file for `bench`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect lanes in a directory of PPM/PGM frames.
    Detect { input_dir: PathBuf },
    /// Drive the simulated vehicle around a track file.
    Simulate {
        track: PathBuf,
        /// Directory for annotated per-frame PPMs.
        #[arg(long)]
        frames_dir: Option<PathBuf>,
    },
    /// Measure detection-chain throughput on synthetic frames.
    Bench {
        #[arg(long, default_value_t = 300)]
        frames: usize,
    },
}

fn effective_config(args: &Args) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => cli::load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

fn run(args: Args) -> Result<ExitCode> {
    let cfg = effective_config(&args)?;
    if args.dump_config {
        print!("{}", cfg.dump());
        return Ok(ExitCode::SUCCESS);
    }
    let Some(command) = &args.command else {
        bail!("no command given; try --help");
    };
    match command {
        Command::Detect { input_dir } => {
            let out = args
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("detect_out"));
            let summary = cli::cmd_detect(input_dir, &out, &cfg)?;
            println!("frames={} csv={}", summary.frames, summary.csv.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { track, frames_dir } => {
            let log = cli::cmd_simulate(track, &cfg, args.out.as_deref(), frames_dir.as_deref())?;
            println!("{}", log.summary());
            Ok(if log.completed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Bench { frames } => {
            let report = cli::cmd_bench(&cfg, *frames)?;
            let text = report.render();
            print!("{text}");
            if let Some(path) = &args.out {
                std::fs::write(path, &text)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
