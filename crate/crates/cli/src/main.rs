//! `mlsm`: synthetic data, compression, two-stage training, enhancement and
//! evaluation from one binary.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlsm_core::Error;

#[derive(Debug, Parser)]
#[command(name = "mlsm", version, about = "Compressed dark image enhancement by multi-level latent space mapping")]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Shared {
    /// Training config file (`key = value` lines)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for data generation and training (overrides the config's seeds)
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Bit-reproducible outputs; also drops wall time from reports
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Output directory for artifacts and the run report
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic paired corpus (normal and compressed-dark images plus a manifest)
    SynthData(SynthArgs),
    /// Round-trip a PPM image through the block-DCT codec
    Compress(CompressArgs),
    /// Stage 1: train both domain VAEs and their discriminators
    TrainVae(TrainVaeArgs),
    /// Stage 2: train the latent mapping networks between frozen VAEs
    TrainMapping(TrainMappingArgs),
    /// Enhance compressed dark images with trained checkpoints
    Enhance(EnhanceArgs),
    /// Score test images against references (PSNR, SSIM, PSNR-B)
    Evaluate(EvaluateArgs),
    /// Finite-difference check of every op and both networks in 64-bit
    Gradcheck,
    /// Train and score mapping networks with 1, 2 and 3 active levels
    AblateLevels(AblateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Training pairs
    #[arg(long, default_value_t = 64)]
    pub train: usize,
    /// Validation pairs
    #[arg(long, default_value_t = 8)]
    pub val: usize,
    /// Held-out test pairs
    #[arg(long, default_value_t = 16)]
    pub test: usize,
    /// Image width in pixels (multiple of 16)
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Image height in pixels (multiple of 16)
    #[arg(long, default_value_t = 64)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// Quality factor in 1..=100
    #[arg(long)]
    pub qf: u32,
    /// Input PPM
    pub input: PathBuf,
    /// Output PPM
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainVaeArgs {
    /// Dataset directory (or its manifest.tsv)
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainMappingArgs {
    /// Dataset directory (or its manifest.tsv)
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Directory holding the Stage-1 checkpoints
    #[arg(long, value_name = "DIR")]
    pub vae: PathBuf,
    /// Number of active top levels (default: the config's active levels)
    #[arg(long, value_name = "N")]
    pub levels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Directory holding the Stage-1 checkpoints
    #[arg(long, value_name = "DIR")]
    pub vae: PathBuf,
    /// Directory holding the mapping checkpoint (default: same as --vae)
    #[arg(long, value_name = "DIR")]
    pub mapping: Option<PathBuf>,
    /// Map only the top N levels (1, 2 or 3); lower levels pass through unmapped
    #[arg(long, value_name = "N")]
    pub levels: Option<usize>,
    /// Input PPM file or directory of PPM files
    pub input: PathBuf,
    /// Output PPM file or directory
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of test images (PPM)
    #[arg(long, value_name = "DIR")]
    pub test: PathBuf,
    /// Directory of reference images with matching file names
    #[arg(long = "ref", value_name = "DIR")]
    pub reference: PathBuf,
    /// Stage-1 checkpoints; enables the latent-versus-image MSE diagnostic
    #[arg(long, value_name = "DIR", requires = "data")]
    pub vae: Option<PathBuf>,
    /// Dataset whose test split feeds the diagnostic
    #[arg(long, value_name = "PATH", requires = "vae")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Dataset directory (or its manifest.tsv)
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Directory holding the Stage-1 checkpoints
    #[arg(long, value_name = "DIR")]
    pub vae: PathBuf,
    /// Seeded repetitions
    #[arg(long, default_value_t = 3)]
    pub reps: u64,
}

/// 1 usage, 2 data or parse, 3 numerical abort.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) => 1,
        Error::Mismatch(_) | Error::Parse { .. } | Error::Io { .. } | Error::Tensor(_) => 2,
        Error::Numerical(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mlsm: {}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
