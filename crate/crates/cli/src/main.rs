mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tsr_core::misalign::PerturbationSpec;

/// Table structure recognition toolkit.
#[derive(Debug, Parser)]
#[command(name = "tsr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Image/object counts and the folded aspect-ratio histogram.
    Stats {
        gt: PathBuf,
        /// Write the histogram as CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// How well an anchor grid covers the ground-truth boxes.
    Anchors {
        gt: PathBuf,
        /// Comma-separated aspect ratios (height / width); defaults to the table ratio set.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Multi-label ground truth to single-label (pseudo-class) form.
    EncodeLabels {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Max per-coordinate difference for two boxes to count as one.
        #[arg(long, default_value_t = tsr_core::labelspace::DEFAULT_BOX_MATCH_TOLERANCE)]
        tolerance: f64,
    },
    /// Single-label predictions back to multi-label form.
    DecodeLabels {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Detections to one HTML file per image.
    Reconstruct {
        predictions: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Score threshold applied to every class.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Structure-only TEDS of a directory of HTML predictions.
    Teds {
        html_dir: PathBuf,
        gt: PathBuf,
        /// Write per-sample scores as CSV.
        #[arg(long)]
        per_sample: Option<PathBuf>,
    },
    /// COCO-style AP of detections against ground truth.
    CocoEval {
        predictions: PathBuf,
        gt: PathBuf,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Score perturbed ground truth under mAP and TEDS.
    Misalign {
        gt: PathBuf,
        /// `mode:magnitude[:seed]` with mode one of dilate, shrink, snap, merge. Repeatable.
        #[arg(long = "spec")]
        specs: Vec<PerturbationSpec>,
        /// Write the report as CSV.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the convolution and attention kernel invariants.
    KernelsCheck {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Write synthetic ground truth (gt.json) and perfect predictions (pred.json).
    Generate {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 24)]
        tables: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        span_probability: f64,
        #[arg(long, default_value_t = 0.8)]
        header_probability: f64,
        #[arg(long, default_value_t = 0.15)]
        projected_row_probability: f64,
        #[arg(long, default_value_t = 3)]
        min_rows: usize,
        #[arg(long, default_value_t = 8)]
        max_rows: usize,
        #[arg(long, default_value_t = 2)]
        min_cols: usize,
        #[arg(long, default_value_t = 6)]
        max_cols: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{} record(s) failed:", failures.len());
            for (id, err) in &failures {
                eprintln!("  {id}: [{}] {err}", err.category().name());
            }
            ExitCode::from(failures[0].1.category().exit_code() as u8)
        }
        Err(err) => {
            eprintln!("error[{}]: {err}", err.category().name());
            ExitCode::from(err.category().exit_code() as u8)
        }
    }
}
