use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ltd_cli::commands::{cmd_bench, cmd_detect, cmd_eval, cmd_synth, SynthArgs};

/// Layered tensor decomposition for hyperspectral anomaly detection.
#[derive(Parser)]
#[command(name = "ltd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run anomaly detection on a cube and write the detection maps.
    Detect {
        /// Run configuration (key=value lines).
        #[arg(long)]
        config: PathBuf,
        /// Input cube in HSC1 format.
        #[arg(long)]
        cube: PathBuf,
        /// Output directory for T1.pgm, T2.pgm, T.pgm, T.csv, trace.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a detection map against a reference mask.
    Eval {
        /// Raw score map (CSV, one image row per line).
        #[arg(long)]
        scores: PathBuf,
        /// Binary PGM mask; samples above 127 mark anomalies.
        #[arg(long)]
        mask: PathBuf,
        /// Output directory for roc.csv and report.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic planted-anomaly dataset.
    Synth {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long)]
        n3: usize,
        /// Spectral factor width.
        #[arg(long)]
        b: usize,
        /// Planted tubal rank of the background.
        #[arg(long)]
        rank: usize,
        /// Number of planted anomaly pixels.
        #[arg(long)]
        anomalies: usize,
        /// Gaussian noise standard deviation.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for cube.hsc and mask.pgm.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the fixed-width and rank-adaptive solvers on synthetic data.
    Bench {
        /// Output directory for bench.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("LTD_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Ignore failures: the pool may already be initialized in
                // tests that call into the library first.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: LTD_THREADS={raw:?} is not a positive integer; ignored"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Detect { config, cube, out } => cmd_detect(config, cube, out),
        Command::Eval { scores, mask, out } => cmd_eval(scores, mask, out),
        Command::Synth {
            n1,
            n2,
            n3,
            b,
            rank,
            anomalies,
            sigma,
            seed,
            out,
        } => cmd_synth(
            &SynthArgs {
                n1: *n1,
                n2: *n2,
                n3: *n3,
                b: *b,
                rank: *rank,
                anomalies: *anomalies,
                sigma: *sigma,
                seed: *seed,
            },
            out,
        ),
        Command::Bench { out } => cmd_bench(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
