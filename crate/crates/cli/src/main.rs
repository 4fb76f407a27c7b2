use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use moco_cli::commands::{self, EvaluateArgs, ImageFormat, InferArgs, SimulateArgs};
use moco_cli::config::RunConfig;
use moco_core::kspace::MotionRanges;

#[derive(Parser)]
#[command(name = "moco", version, about = "Respiratory motion artifact simulation and correction for MR images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Mraw,
    Pgm,
}

#[derive(Subcommand)]
enum Command {
    /// Corrupt every image in a directory with simulated respiratory motion.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Displacement amplitude range in pixels.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [1.0, 4.0])]
        amplitude: Vec<f64>,
        /// Breathing cycles per acquisition.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [2.0, 4.0])]
        cycles: Vec<f64>,
        /// Initial phase range in radians.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.0, std::f64::consts::TAU])]
        phase: Vec<f64>,
        /// Fraction of central phase-encode lines left untouched.
        #[arg(long, default_value_t = 0.1)]
        center_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the generator and discriminator from a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Correct images with a trained generator checkpoint.
    Infer {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Only read `<stem>.<TAG>.*` files, e.g. `corrupt`.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Score predictions against targets and write a CSV report.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        pred_tag: Option<String>,
        #[arg(long)]
        target_tag: Option<String>,
    },
    /// Write synthetic ellipse phantoms.
    Phantoms {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, value_enum, default_value_t = Format::Mraw)]
        format: Format,
    },
}

fn pair(v: &[f64]) -> [f64; 2] {
    [v[0], v[1]]
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { input, output, amplitude, cycles, phase, center_fraction, seed } => {
            let ranges = MotionRanges {
                amplitude_px: pair(&amplitude),
                cycles: pair(&cycles),
                phase_rad: pair(&phase),
                center_fraction,
            };
            let m = commands::simulate(&SimulateArgs { input, output: output.clone(), ranges, seed })?;
            eprintln!("wrote {} pairs to {}", m.records.len(), output.display());
        }
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let last = commands::train(&cfg)?;
            eprintln!("final checkpoint {}", last.display());
        }
        Command::Infer { weights, input, output, tag } => {
            let n = commands::infer(&InferArgs { weights, input, output: output.clone(), tag })?;
            eprintln!("wrote {n} corrected images to {}", output.display());
        }
        Command::Evaluate { pred, target, report, pred_tag, target_tag } => {
            let rows = commands::evaluate(&EvaluateArgs { pred, target, report: report.clone(), pred_tag, target_tag })?;
            eprintln!("scored {} pairs into {}", rows.len(), report.display());
        }
        Command::Phantoms { output, count, seed, size, format } => {
            let format = match format {
                Format::Mraw => ImageFormat::Mraw,
                Format::Pgm => ImageFormat::Pgm,
            };
            let files = commands::phantoms(&output, count, seed, size, format)?;
            eprintln!("wrote {} phantoms to {}", files.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
