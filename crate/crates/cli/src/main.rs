mod commands;
mod config;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rdb_core::cfar::BASELINE_CASCADES;
use rdb_core::prelude::ChamferMode;

use config::RunConfig;

/// Radar detection workbench: simulate FMCW MIMO radar frames and lidar
/// ground truth, process them into radar cubes, run CFAR cascades and score
/// the detections against lidar occupancy grids.
#[derive(Parser)]
#[command(
    name = "rdb",
    version,
    after_help = "Environment:\n  RDB_THREADS  cap on worker threads (default: all cores)\n  RUST_LOG     log filter (default: info)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sum,
    Mean,
}

impl From<Mode> for ChamferMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Sum => ChamferMode::Sum,
            Mode::Mean => ChamferMode::Mean,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render ADC frames and lidar clouds for a scene file or random streets.
    Simulate {
        /// Scene TOML; frames advance it by `frame_period`. Random streets if absent.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Run configuration TOML (waveform, pipeline, lidar, street).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Turn ADC frames into radar cubes.
    Process {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a CFAR cascade on radar cubes; writes detection CSVs and grids.
    Detect {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Detector TOML or a preset name such as "2D OS(RA) + 1D OS(D)".
        #[arg(long, default_value = BASELINE_CASCADES[0])]
        detector: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Voxelize point clouds onto the radar grid.
    Voxelize {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Drop the ground plane before voxelizing.
        #[arg(long)]
        remove_ground: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score predicted grids or clouds against ground truth, pairwise in order.
    Evaluate {
        #[arg(long, required = true, num_args = 1..)]
        pred: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        gt: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "mean")]
        mode: Mode,
        /// Writes eval.csv here; prints to stdout otherwise.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Rank detectors on a random-street test set by Chamfer distance and Pd.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Detector files or presets; the five baseline cascades by default.
        #[arg(long)]
        detector: Vec<String>,
        #[arg(long, default_value_t = 50)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "mean")]
        mode: Mode,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn out_dir(path: &Path) -> Result<&Path> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(path)
}

fn threads() -> Result<()> {
    let Ok(value) = std::env::var("RDB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("RDB_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    threads()?;
    match cli.command {
        Command::Simulate {
            scene,
            config,
            frames,
            seed,
            out_dir: out,
        } => {
            let config = RunConfig::load(config.as_deref())?;
            commands::simulate(scene.as_deref(), &config, frames, seed, out_dir(&out)?)
        }
        Command::Process {
            inputs,
            config,
            out_dir: out,
        } => {
            let config = RunConfig::load(config.as_deref())?;
            commands::process(&inputs, &config, out_dir(&out)?)
        }
        Command::Detect {
            inputs,
            detector,
            out_dir: out,
        } => commands::detect(&inputs, &detector, out_dir(&out)?),
        Command::Voxelize {
            inputs,
            config,
            remove_ground,
            out_dir: out,
        } => {
            let config = RunConfig::load(config.as_deref())?;
            commands::voxelize_clouds(&inputs, &config, remove_ground, out_dir(&out)?)
        }
        Command::Evaluate {
            pred,
            gt,
            mode,
            out_dir: out,
        } => {
            let out = out.as_deref().map(out_dir).transpose()?;
            commands::evaluate(&pred, &gt, mode.into(), out)
        }
        Command::Sweep {
            config,
            detector,
            frames,
            seed,
            mode,
            out_dir: out,
        } => {
            let config = RunConfig::load(config.as_deref())?;
            let detectors = if detector.is_empty() {
                BASELINE_CASCADES.iter().map(|s| s.to_string()).collect()
            } else {
                detector
            };
            sweep::sweep(
                &config,
                &detectors,
                frames,
                seed,
                mode.into(),
                out_dir(&out)?,
            )
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One line: the error and its causes joined by ": ".
            eprintln!("rdb: {e:#}");
            ExitCode::FAILURE
        }
    }
}
