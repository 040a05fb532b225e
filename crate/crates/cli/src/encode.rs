//! Per-pixel encoding rasters of a posed camera.

use std::f32::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use camray_core::cameras::{ray_map, CameraModel};
use camray_core::encodings::{latup_raster, DEFAULT_UP_DELTA};
use camray_core::geometry::{plucker, Pose};
use camray_core::raster::{save_mask_png, Image, Raster};
use clap::Args;

use crate::error::{io_error, CliResult};
use crate::io::{self, RunManifest};

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Camera JSON.
    #[arg(long)]
    pub camera: PathBuf,
    /// Pose JSON `{"T_wc": [16 values]}`.
    #[arg(long)]
    pub pose: PathBuf,
    /// Output path prefix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LatUpArgs {
    #[command(flatten)]
    pub common: EncodeArgs,
    /// Tilt angle in radians used for the up direction.
    #[arg(long, default_value_t = DEFAULT_UP_DELTA)]
    pub delta: f64,
}

fn load(args: &EncodeArgs) -> CliResult<(CameraModel, Pose, RunManifest)> {
    let mut manifest = RunManifest::new(None);
    let cam = io::read_camera(&args.camera)?;
    let pose = io::read_pose(&args.pose)?;
    manifest.add_input(&args.camera)?;
    manifest.add_input(&args.pose)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        io::create_dir(dir)?;
    }
    Ok((cam, pose, manifest))
}

fn save_raster(raster: &Raster, path: &Path) -> CliResult<()> {
    raster.save(path).map_err(|e| io_error(path, e))
}

/// Writes `PREFIX.latup.cray` (lat, up_u, up_v), `PREFIX.latup_mask.png`
/// and a latitude preview `PREFIX.lat.png`.
pub fn run_latup(args: &LatUpArgs) -> CliResult<()> {
    let (cam, pose, manifest) = load(&args.common)?;
    let (raster, mask) = latup_raster(&cam, &pose, args.delta)?;
    let prefix = &args.common.out;
    save_raster(&raster, &io::with_suffix(prefix, ".latup.cray"))?;
    let mask_png = io::with_suffix(prefix, ".latup_mask.png");
    let valid: Vec<bool> = mask.data().iter().map(|&m| m > 0.5).collect();
    save_mask_png(&valid, mask.width(), mask.height(), &mask_png).map_err(|e| io_error(&mask_png, e))?;
    let preview = io::with_suffix(prefix, ".lat.png");
    raster
        .save_channel_png(0, -FRAC_PI_2, FRAC_PI_2, &preview)
        .map_err(|e| io_error(&preview, e))?;
    manifest.write(&io::with_suffix(prefix, ".latup.manifest.json"))
}

/// Writes `PREFIX.plucker.cray` (direction, moment; NaN outside the lens
/// image), `PREFIX.plucker_mask.png` and a direction preview
/// `PREFIX.plucker.png`.
pub fn run_plucker(args: &EncodeArgs) -> CliResult<()> {
    let (cam, pose, manifest) = load(args)?;
    let rays = ray_map(&cam, &pose);
    let (w, h) = (rays.width(), rays.height());
    let mut data = Vec::with_capacity(w * h * 6);
    let mut valid = Vec::with_capacity(w * h);
    let mut preview = Vec::with_capacity(w * h);
    for ray in rays.iter() {
        match ray {
            Some(r) => {
                data.extend(plucker(r).to_array().map(|v| v as f32));
                valid.push(true);
                preview.push(r.direction.map(|c| (0.5 + 0.5 * c) as f32).into());
            }
            None => {
                data.extend([f32::NAN; 6]);
                valid.push(false);
                preview.push([0.0; 3]);
            }
        }
    }
    let raster = Raster::new(h, w, 6, data)?;
    let prefix = &args.out;
    save_raster(&raster, &io::with_suffix(prefix, ".plucker.cray"))?;
    let mask_png = io::with_suffix(prefix, ".plucker_mask.png");
    save_mask_png(&valid, w, h, &mask_png).map_err(|e| io_error(&mask_png, e))?;
    let png = io::with_suffix(prefix, ".plucker.png");
    Image::new(w, h, preview).save_png(&png).map_err(|e| io_error(&png, e))?;
    manifest.write(&io::with_suffix(prefix, ".plucker.manifest.json"))
}
