//! `camray`: rendering, encoding rasters, attention checks and metrics.
//!
//! Exit codes: 0 success, 2 input error, 3 geometry error, 4 invariance
//! failure.

mod attend;
mod encode;
mod error;
mod evaluate;
mod io;
mod render;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "camray", version, about = "Camera geometry and camera-aware attention toolkit")]
struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true, env = "CAMRAY_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render panorama frames into a virtual camera clip.
    Render(render::RenderArgs),
    /// Latitude and up-direction raster of a posed camera.
    Latup(encode::LatUpArgs),
    /// Plücker ray raster of a posed camera.
    Plucker(encode::EncodeArgs),
    /// Run the attention invariance suite.
    Attend(attend::AttendArgs),
    /// Relative-pose errors between two trajectories.
    Metrics(evaluate::MetricsArgs),
    /// Pitch, roll, field-of-view and distortion errors.
    Calib(evaluate::CalibArgs),
    /// Yaw-only similarity alignment of two point sets.
    Align(evaluate::AlignArgs),
    /// Resample frames into a capped-field-of-view pinhole camera.
    Rectify(evaluate::RectifyArgs),
    /// Largest rotation from the first frame of a trajectory.
    Score(evaluate::ScoreArgs),
    /// Draw a random camera of a lens category.
    Sample(evaluate::SampleArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(error::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Render(a) => render::run(a),
        Command::Latup(a) => encode::run_latup(a),
        Command::Plucker(a) => encode::run_plucker(a),
        Command::Attend(a) => attend::run(a),
        Command::Metrics(a) => evaluate::run_metrics(a),
        Command::Calib(a) => evaluate::run_calib(a),
        Command::Align(a) => evaluate::run_align(a),
        Command::Rectify(a) => evaluate::run_rectify(a),
        Command::Score(a) => evaluate::run_score(a),
        Command::Sample(a) => evaluate::run_sample(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
