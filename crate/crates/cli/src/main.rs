//! `diffsr`: degrade, super-resolve, train, evaluate and validate from the command line.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

mod commands;
mod config;
mod wav;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "diffsr", version, about = "Diffusion-based audio super-resolution")]
struct Cli {
    /// Worker threads for per-file parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lowpass and downsample a WAV file.
    Degrade(DegradeArgs),
    /// Super-resolve low-rate WAV files with conditional diffusion sampling.
    Sr(SrArgs),
    /// Train the toy UDM on WAV files or a synthetic corpus.
    Train(TrainArgs),
    /// Log-spectral distance between reference and estimate.
    Eval(EvalArgs),
    /// Run the Gaussian oracle suite; exits 3 if any check fails.
    ValidateOracle(ValidateArgs),
    /// Draw an unconditional sample.
    SampleUncond(SampleArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FilterArg {
    Sinc,
    Stft,
    Ideal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SyntheticArg {
    Ar1,
    Tones,
    Chirps,
    Speech,
}

#[derive(Args, Debug)]
pub struct DegradeArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub target_rate: Option<u32>,
    #[arg(long, value_enum)]
    pub filter: Option<FilterArg>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SrArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output file (single input only).
    #[arg(short, long, conflicts_with = "out_dir")]
    pub output: Option<PathBuf>,
    /// Output directory; each input keeps its file name.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, conflicts_with = "gaussian_prior")]
    pub checkpoint: Option<PathBuf>,
    /// JSON file with `sample_rate`, `frame_length` and `psd`.
    #[arg(long)]
    pub gaussian_prior: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub filter: Option<FilterArg>,
    /// Per-step JSONL trace (single input only).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training WAV files; all must share one sample rate.
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, conflicts_with = "inputs")]
    pub synthetic: Option<SyntheticArg>,
    /// Sample rate of the synthetic corpus.
    #[arg(long)]
    pub rate: Option<u32>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSONL training log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    pub reference: Option<PathBuf>,
    pub estimate: Option<PathBuf>,
    /// CSV with `reference,estimate` columns; evaluated in parallel.
    #[arg(long, conflicts_with_all = ["reference", "estimate"])]
    pub pairs: Option<PathBuf>,
    /// Also report LSD below `h/2` Hz for this low rate `h`.
    #[arg(long)]
    pub low_rate: Option<u32>,
    /// Write the metric table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Reduced sample counts.
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, conflicts_with = "gaussian_prior")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub gaussian_prior: Option<PathBuf>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Degrade(a) => commands::degrade(a),
        Command::Sr(a) => commands::sr(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::ValidateOracle(a) => commands::validate_oracle(a),
        Command::SampleUncond(a) => commands::sample_uncond(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
