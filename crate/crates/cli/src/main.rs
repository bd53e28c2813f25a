//! `qrf`: simulation, frame stores, trajectories, training, rendering and
//! benchmarks from one binary.

mod bench;
mod config;
mod error;
mod manifest;
mod poses;
mod store;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult, Kind};

#[derive(Debug, Parser)]
#[command(name = "qrf", version, about = "Quanta radiance fields from single-photon binary frames")]
pub struct Cli {
    /// Worker threads; 1 gives bit-reproducible runs. Defaults to all cores.
    #[arg(long, global = true, env = "QRF_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene along a trajectory and simulate a binary frame store.
    Simulate(SimulateArgs),
    /// Pack PNG binary frames (nonzero = detection) into a frame store.
    Pack(PackArgs),
    /// Print a frame store's header, size and bandwidth.
    Inspect(InspectArgs),
    /// Average consecutive binary frames into a virtual exposure.
    Expose(ExposeArgs),
    /// Trajectory tools.
    #[command(subcommand)]
    Poses(PosesCommand),
    /// Fit a radiance field (and poses) to a frame store.
    Train(TrainArgs),
    /// Render novel views from a field checkpoint.
    Render(RenderArgs),
    /// Run a benchmark experiment spec.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Root seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Config override `dotted.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    /// PNG files or directories of PNGs (taken in name order).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output store (.qrfbin).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub frame_rate: f64,
    /// Exposure per frame in seconds; defaults to 1 / frame-rate.
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub store: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ExposeArgs {
    pub store: PathBuf,
    /// First frame.
    #[arg(long)]
    pub start: usize,
    /// Number of frames averaged.
    #[arg(long)]
    pub n: usize,
    /// Output raster (.qrfflux) of the binary mean.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an 8-bit PNG of the mean.
    #[arg(long)]
    pub png: Option<PathBuf>,
    /// Write the maximum-likelihood flux (photons/s) instead of the mean.
    #[arg(long)]
    pub flux: bool,
}

#[derive(Debug, Subcommand)]
pub enum PosesCommand {
    /// Fourier-lowpass a trajectory.
    Smooth(SmoothArgs),
    /// Densify sparse anchor poses into one pose per frame.
    Interp(InterpArgs),
    /// Add band-limited Gaussian noise.
    Perturb(PerturbArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaperArg {
    BrickWall,
    RaisedCosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Mirror,
    Periodic,
}

#[derive(Debug, Args)]
pub struct TrajectoryIo {
    /// Input trajectory (CSV or binary).
    #[arg(long)]
    pub input: PathBuf,
    /// Output trajectory; binary when the extension is `.qrfpose`, else CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Frame rate in Hz, if the input does not record one.
    #[arg(long)]
    pub frame_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[command(flatten)]
    pub io: TrajectoryIo,
    #[arg(long)]
    pub cutoff_hz: f64,
    #[arg(long, value_enum, default_value = "raised-cosine")]
    pub taper: TaperArg,
    /// Width of the raised-cosine roll-off; defaults to 10% of the cutoff.
    #[arg(long)]
    pub taper_width_hz: Option<f64>,
    #[arg(long, value_enum, default_value = "mirror")]
    pub boundary: BoundaryArg,
}

#[derive(Debug, Args)]
pub struct InterpArgs {
    /// CSV of `(frame_index, pose)` anchors.
    #[arg(long)]
    pub anchors: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub frame_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub io: TrajectoryIo,
    #[arg(long, default_value_t = 0.0)]
    pub band_low_hz: f64,
    /// Upper band edge; defaults to Nyquist.
    #[arg(long)]
    pub band_high_hz: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub translation_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rotation_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Frame store (.qrfbin).
    #[arg(long)]
    pub frames: PathBuf,
    /// Initial poses, one per frame.
    #[arg(long)]
    pub poses: PathBuf,
    /// Training config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Start from this checkpoint instead of the default initial field.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Root seed; overrides `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Config override `dotted.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Field checkpoint (.qrffield).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Camera poses to render.
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Horizontal field of view in degrees.
    #[arg(long, default_value_t = 40.0)]
    pub fov_deg: f64,
    /// Render every this many poses.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Convert detection probabilities to flux with this exposure (s).
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 0.0)]
    pub near: f64,
    #[arg(long, default_value_t = 100.0)]
    pub far: f64,
    /// Display gamma for the PNGs.
    #[arg(long, default_value_t = 2.4)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment spec (TOML).
    pub spec: PathBuf,
    /// Results directory; defaults to `results/<name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Spec override `dotted.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

fn init_threads(requested: Option<usize>) -> CliResult<usize> {
    let n = match requested {
        Some(0) => return Err(CliError::usage("--threads must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::new(Kind::Usage, e.to_string()))?;
    Ok(n)
}

fn run(cli: Cli) -> CliResult<()> {
    let threads = init_threads(cli.threads)?;
    match cli.command {
        Command::Simulate(a) => store::simulate(&a, threads),
        Command::Pack(a) => store::pack(&a, threads),
        Command::Inspect(a) => store::inspect(&a),
        Command::Expose(a) => store::expose(&a, threads),
        Command::Poses(c) => poses::run(&c, threads),
        Command::Train(a) => train::train(&a, threads),
        Command::Render(a) => train::render(&a, threads),
        Command::Bench(a) => bench::bench(&a, threads),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Kind::Usage as u8 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qrf: {e}");
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind as u8)
        }
    }
}
