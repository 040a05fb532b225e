//! Trajectory metrics, calibration errors, alignment, rectification and
//! camera sampling.

use std::path::{Path, PathBuf};

use camray_core::cameras::CameraSpec;
use camray_core::metrics::{
    align_yaw_umeyama, calib_errors, pose_metrics, prep_rectified, rotation_score, CalibEstimate, Reduction,
    DEFAULT_SAMPLES, RECTIFY_CAP_DEG,
};
use camray_core::raster::save_mask_png;
use camray_core::synthesis::{sample_camera, LensCategory};
use clap::Args;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::{input, io_error, CliError, CliResult};
use crate::io::{self, RunManifest};

/// JSON result destination: stdout, or a file with a manifest beside it.
#[derive(Debug, Args)]
pub struct OutArg {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit<T: Serialize>(value: &T, out: &OutArg, manifest: RunManifest) -> CliResult<()> {
    match &out.out {
        Some(path) => {
            io::write_json(path, value)?;
            manifest.write(&io::with_suffix(path, ".manifest.json"))
        }
        None => {
            print!("{}", io::to_json(value));
            Ok(())
        }
    }
}

fn with_inputs(seed: Option<u64>, paths: &[&Path]) -> CliResult<RunManifest> {
    let mut m = RunManifest::new(seed);
    for p in paths {
        m.add_input(p)?;
    }
    Ok(m)
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Timestamps sampled uniformly over the clip.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn run_metrics(args: &MetricsArgs) -> CliResult<()> {
    let gt = io::read_trajectory(&args.gt)?;
    let pred = io::read_trajectory(&args.pred)?;
    let m = pose_metrics(&gt, &pred, args.samples)?;
    emit(&m, &args.out, with_inputs(None, &[&args.gt, &args.pred])?)
}

#[derive(Debug, Args)]
pub struct CalibArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Sum per-frame pitch and roll errors instead of averaging them.
    #[arg(long)]
    pub sum: bool,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn run_calib(args: &CalibArgs) -> CliResult<()> {
    let gt: CalibEstimate = io::read_json(&args.gt)?;
    let pred: CalibEstimate = io::read_json(&args.pred)?;
    let reduce = if args.sum { Reduction::Sum } else { Reduction::Mean };
    let e = calib_errors(&gt, &pred, reduce)?;
    emit(&e, &args.out, with_inputs(None, &[&args.gt, &args.pred])?)
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Points `[[x, y, z], ...]` or a trajectory whose camera centers are used.
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub dst: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

fn read_points(path: &Path) -> CliResult<Vec<Vector3<f64>>> {
    let value: serde_json::Value = io::read_json(path)?;
    if value.is_array() {
        let points: Vec<[f64; 3]> = serde_json::from_value(value).map_err(|e| io_error(path, e))?;
        return Ok(points.into_iter().map(Vector3::from).collect());
    }
    let traj = io::read_trajectory(path)?;
    Ok(traj.poses().map(|p| p.translation).collect())
}

pub fn run_align(args: &AlignArgs) -> CliResult<()> {
    let src = read_points(&args.src)?;
    let dst = read_points(&args.dst)?;
    let a = align_yaw_umeyama(&src, &dst)?;
    let value = json!({
        "scale": a.scale,
        "yaw_deg": a.yaw.to_degrees(),
        "translation": [a.translation.x, a.translation.y, a.translation.z],
        "rmse": a.rmse,
    });
    emit(&value, &args.out, with_inputs(None, &[&args.src, &args.dst])?)
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn run_score(args: &ScoreArgs) -> CliResult<()> {
    let traj = io::read_trajectory(&args.trajectory)?;
    let score = rotation_score(&traj)?;
    emit(&json!({ "rotation_score_deg": score }), &args.out, with_inputs(None, &[&args.trajectory])?)
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    /// Camera JSON of the input frames.
    #[arg(long)]
    pub camera: PathBuf,
    /// Directory of PNG frames.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Horizontal field-of-view cap in degrees.
    #[arg(long, default_value_t = RECTIFY_CAP_DEG)]
    pub cap: f64,
}

pub fn run_rectify(args: &RectifyArgs) -> CliResult<()> {
    let cam = io::read_camera(&args.camera)?;
    let files = io::list_files(&args.input, "png")?;
    let mut manifest = with_inputs(None, &[&args.camera])?;
    manifest.add_inputs(&files)?;
    let frames = files
        .iter()
        .map(|p| {
            let img = io::read_image(p)?;
            if (img.width, img.height) != (cam.width() as usize, cam.height() as usize) {
                return Err(input(format!(
                    "{}: {}×{} frame for a {}×{} camera",
                    p.display(),
                    img.width,
                    img.height,
                    cam.width(),
                    cam.height()
                )));
            }
            Ok(img)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let rect = prep_rectified(&frames, &cam, args.cap)?;
    io::create_dir(&args.out)?;
    let (w, h) = (rect.camera.width() as usize, rect.camera.height() as usize);
    for (path, img) in files.iter().zip(&rect.frames) {
        let name = path.file_name().expect("listed files have names");
        let dst = args.out.join(name);
        img.save_png(&dst).map_err(|e| io_error(&dst, e))?;
    }
    let mask = args.out.join("mask.png");
    save_mask_png(&rect.mask, w, h, &mask).map_err(|e| io_error(&mask, e))?;
    io::write_json(&args.out.join("camera.json"), &CameraSpec::from(rect.camera))?;
    manifest.write(&args.out.join("manifest.json"))
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub category: LensCategory,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 832)]
    pub width: u32,
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    #[command(flatten)]
    pub out: OutArg,
}

pub fn run_sample(args: &SampleArgs) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let cam = sample_camera(args.category, args.width, args.height, &mut rng).map_err(CliError::from)?;
    emit(&CameraSpec::from(cam), &args.out, RunManifest::new(Some(args.seed)))
}
