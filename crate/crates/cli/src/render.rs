//! Panorama clips to virtual camera clips.

use std::path::PathBuf;

use camray_core::cameras::CameraSpec;
use camray_core::geometry::Rotation3;
use camray_core::metrics::TrajectoryFrame;
use camray_core::raster::save_mask_png;
use camray_core::synthesis::{
    augment_rotations, compose_virtual_pose, normalize_scale, render_view, sample_camera, AugmentRanges,
    AugmentationMode, LensCategory,
};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{input, io_error, CliError, CliResult};
use crate::io::{self, RunManifest};

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Directory of equirectangular PNG frames, one per trajectory frame.
    #[arg(long)]
    pub erp: PathBuf,
    /// Panorama trajectory JSON.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Camera JSON.
    #[arg(long, conflicts_with = "sample", required_unless_present = "sample")]
    pub camera: Option<PathBuf>,
    /// Sample a camera of this lens category instead.
    #[arg(long)]
    pub sample: Option<LensCategory>,
    /// Output width for sampled cameras.
    #[arg(long, default_value_t = 832)]
    pub width: u32,
    /// Output height for sampled cameras.
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    /// Rotation augmentation: yaw, yaw_pitch or pan.
    #[arg(long)]
    pub augment: Option<AugmentationMode>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory of per-frame depth rasters used to normalize translation scale.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Augment {
    mode: AugmentationMode,
    ranges: AugmentRanges,
}

#[derive(Serialize)]
struct AnnotatedFrame {
    i: usize,
    #[serde(rename = "T_wc")]
    t_wc: [f64; 16],
}

#[derive(Serialize)]
struct Annotation {
    camera: CameraSpec,
    augment: Option<Augment>,
    seed: u64,
    scale: Option<f64>,
    frames: Vec<AnnotatedFrame>,
}

pub fn run(args: &RenderArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new(Some(args.seed));
    let mut traj = io::read_trajectory(&args.trajectory)?;
    manifest.add_input(&args.trajectory)?;
    let erp_files = io::list_files(&args.erp, "png")?;
    if erp_files.len() != traj.len() {
        return Err(input(format!(
            "{}: {} panoramas for {} trajectory frames",
            args.erp.display(),
            erp_files.len(),
            traj.len()
        )));
    }
    manifest.add_inputs(&erp_files)?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let cam = match (&args.camera, args.sample) {
        (Some(path), _) => {
            manifest.add_input(path)?;
            io::read_camera(path)?
        }
        (None, Some(cat)) => sample_camera(cat, args.width, args.height, &mut rng)?,
        (None, None) => return Err(input("either --camera or --sample is required")),
    };
    if cam.xfov_deg().is_none() {
        return Err(CliError::Geometry("render target must be a pinhole or UCM camera".into()));
    }

    let mut scale = None;
    if let Some(dir) = &args.depth {
        let files = io::list_files(dir, "cray")?;
        manifest.add_inputs(&files)?;
        let depths = files.iter().map(|p| io::read_raster(p)).collect::<CliResult<Vec<_>>>()?;
        let scaled = normalize_scale(&traj, &depths)?;
        scale = Some(camray_core::synthesis::scene_scale(&depths)?);
        traj = scaled;
    }

    let identity = vec![Rotation3::identity(); traj.len()];
    let (augment, r_aug) = match args.augment {
        Some(mode) => {
            let ranges = mode.default_ranges();
            let r = augment_rotations(&identity, mode, &ranges, &mut rng);
            (Some(Augment { mode, ranges }), r)
        }
        None => (None, identity),
    };

    io::create_dir(&args.out)?;
    let mut frames = Vec::with_capacity(traj.len());
    for ((frame, path), r) in traj.frames.iter().zip(&erp_files).zip(&r_aug) {
        let pano = io::read_image(path)?;
        let view = render_view(&pano, &cam, r).map_err(|e| CliError::from(e).context(format!("frame {}", frame.i)))?;
        let (w, h) = (cam.width() as usize, cam.height() as usize);
        let png = args.out.join(format!("frame_{:04}.png", frame.i));
        view.image.save_png(&png).map_err(|e| io_error(&png, e))?;
        let mask = args.out.join(format!("mask_{:04}.png", frame.i));
        save_mask_png(&view.mask, w, h, &mask).map_err(|e| io_error(&mask, e))?;
        let TrajectoryFrame { i, pose } = *frame;
        frames.push(AnnotatedFrame {
            i,
            t_wc: compose_virtual_pose(&pose, r).to_row_major(),
        });
    }

    let annotation = Annotation {
        camera: cam.into(),
        augment,
        seed: args.seed,
        scale,
        frames,
    };
    io::write_json(&args.out.join("annotation.json"), &annotation)?;
    manifest.write(&args.out.join("manifest.json"))
}
