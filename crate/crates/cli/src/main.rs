mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use racemcl_core::motion::MotionModelKind;
use racemcl_core::raycast::BackendKind;
use racemcl_sim::config::SlipKind;
use racemcl_sim::track::TrackKind;

/// Particle-filter localization for race cars: LUT builds, simulated
/// experiments, log replay, and latency benchmarks.
#[derive(Parser)]
#[command(name = "racemcl", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Options shared by every command that reads a configuration.
#[derive(Args, Clone, Default)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set filter.n=1000`. Repeatable; applied in order after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Root seed (same as `--set seed=N`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (same as `--set out_dir=DIR`).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Track bundle directory (same as `--set track.dir=DIR`).
    #[arg(long)]
    pub track: Option<PathBuf>,
    /// Range backend (same as `--set lut.backend=...`).
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Precompute the range lookup table for a track map.
    BuildLut {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output file (default: <track>/map.lut).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Generate a track bundle (map, raceline, centerline).
    GenTrack {
        /// oval or hairpin
        #[arg(long)]
        kind: TrackKind,
        #[arg(short, long)]
        out: PathBuf,
        /// Map resolution (m per cell).
        #[arg(long)]
        resolution: Option<f64>,
        /// Raceline speed cap (m/s).
        #[arg(long)]
        v_max: Option<f64>,
    },
    /// Run the motion-model × slip condition grid in closed loop.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Laps per condition.
        #[arg(long)]
        laps: Option<usize>,
        /// Drive on ground truth with the filter bypassed.
        #[arg(long)]
        ground_truth: bool,
        /// Comma-separated motion models.
        #[arg(long, value_delimiter = ',', value_parser = parse_model)]
        models: Vec<MotionModelKind>,
        /// Comma-separated slip profiles (hq, lq).
        #[arg(long, value_delimiter = ',', value_parser = parse_slip)]
        slips: Vec<SlipKind>,
        /// Build the lookup table in memory when none is configured or present.
        #[arg(long)]
        build_lut: bool,
        /// Also write per-lap logs as JSON lines.
        #[arg(long)]
        write_logs: bool,
    },
    /// Run the filter open-loop on a recorded log.
    Replay {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Log written by `experiment --write-logs`.
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "tum", value_parser = parse_model)]
        model: MotionModelKind,
        #[arg(long)]
        build_lut: bool,
    },
    /// Measure per-step filter latency over particle and scanline counts.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Particle counts to sweep (default: filter.n).
        #[arg(long, value_delimiter = ',')]
        particles: Vec<usize>,
        /// Scanline counts to sweep (default: sensor.k).
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Backends to compare (default: lut.backend).
        #[arg(long, value_delimiter = ',', value_parser = parse_backend)]
        backends: Vec<BackendKind>,
        /// Filter steps per configuration.
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Workload log; by default one ground-truth lap is simulated.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print the fully resolved configuration as TOML.
    DumpConfig {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print every configuration key with its default and meaning.
    ConfigSchema,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s {
        "lut" => Ok(BackendKind::Lut),
        "exact" => Ok(BackendKind::Exact),
        other => Err(format!("unknown backend '{other}' (expected lut, exact)")),
    }
}

fn parse_model(s: &str) -> Result<MotionModelKind, String> {
    s.parse()
}

fn parse_slip(s: &str) -> Result<SlipKind, String> {
    match s {
        "hq" => Ok(SlipKind::Hq),
        "lq" => Ok(SlipKind::Lq),
        other => Err(format!("unknown slip profile '{other}' (expected hq, lq)")),
    }
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    /// The run finished but some laps did not.
    Dnf(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Dnf(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Dnf(m) => write!(f, "incomplete run: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::BuildLut { cfg, out } => commands::build_lut(&cfg, out),
        Cmd::GenTrack {
            kind,
            out,
            resolution,
            v_max,
        } => commands::gen_track(kind, &out, resolution, v_max),
        Cmd::Experiment {
            cfg,
            laps,
            ground_truth,
            models,
            slips,
            build_lut,
            write_logs,
        } => commands::experiment(
            &cfg,
            commands::ExperimentArgs {
                laps,
                ground_truth,
                models,
                slips,
                build_lut,
                write_logs,
            },
        ),
        Cmd::Replay {
            cfg,
            log,
            model,
            build_lut,
        } => commands::replay(&cfg, &log, model, build_lut),
        Cmd::Bench {
            cfg,
            particles,
            k,
            backends,
            steps,
            log,
        } => commands::bench(&cfg, &particles, &k, &backends, steps, log.as_deref()),
        Cmd::DumpConfig { cfg } => commands::resolve(&cfg, &[]).map(|c| print!("{}", config::to_toml(&c))),
        Cmd::ConfigSchema => {
            print!("{}", config::schema());
            Ok(())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("racemcl: {e}");
            ExitCode::from(e.code())
        }
    }
}
