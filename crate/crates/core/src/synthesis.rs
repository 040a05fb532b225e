//! Panorama-to-camera rendering: lens sampling, rotation augmentation,
//! virtual pose composition and equirectangular resampling.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cameras::{CameraModel, PixelCoord};
use crate::error::SynthesisError;
use crate::geometry::{Pose, Rotation3};
use crate::grid::Grid;
use crate::metrics::Trajectory;
use crate::raster::{Image, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LensCategory {
    Pinhole,
    Wide,
    Fisheye,
    Extreme,
}

impl LensCategory {
    pub const ALL: [LensCategory; 4] = [
        LensCategory::Pinhole,
        LensCategory::Wide,
        LensCategory::Fisheye,
        LensCategory::Extreme,
    ];

    /// Inclusive horizontal field of view range in degrees.
    pub fn xfov_range(self) -> (f64, f64) {
        match self {
            LensCategory::Pinhole => (90.0, 110.0),
            LensCategory::Wide => (110.0, 140.0),
            LensCategory::Fisheye => (140.0, 180.0),
            LensCategory::Extreme => (160.0, 200.0),
        }
    }

    /// Inclusive distortion range.
    pub fn xi_range(self) -> (f64, f64) {
        match self {
            LensCategory::Pinhole => (0.0, 0.0),
            LensCategory::Wide => (0.5, 0.95),
            LensCategory::Fisheye => (1.05, 2.0),
            LensCategory::Extreme => (1.5, 2.3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LensCategory::Pinhole => "pinhole",
            LensCategory::Wide => "wide",
            LensCategory::Fisheye => "fisheye",
            LensCategory::Extreme => "extreme",
        }
    }
}

impl fmt::Display for LensCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LensCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown lens category '{s}'"))
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Draws a UCM camera with field of view and distortion uniform in the
/// category's ranges.
pub fn sample_camera<R: Rng>(
    cat: LensCategory,
    width: u32,
    height: u32,
    rng: &mut R,
) -> Result<CameraModel, SynthesisError> {
    let xfov = uniform(rng, cat.xfov_range());
    let xi = uniform(rng, cat.xi_range());
    Ok(CameraModel::ucm(xfov, xi, width, height)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationMode {
    Yaw,
    YawPitch,
    Pan,
}

impl AugmentationMode {
    pub fn name(self) -> &'static str {
        match self {
            AugmentationMode::Yaw => "yaw",
            AugmentationMode::YawPitch => "yaw_pitch",
            AugmentationMode::Pan => "pan",
        }
    }

    /// Default symmetric offset bounds `(yaw, pitch, roll)` in degrees.
    pub fn default_ranges(self) -> AugmentRanges {
        match self {
            AugmentationMode::Yaw => AugmentRanges::new(180.0, 0.0, 0.0),
            AugmentationMode::YawPitch => AugmentRanges::new(180.0, 80.0, 0.0),
            AugmentationMode::Pan => AugmentRanges::new(90.0, 40.0, 30.0),
        }
    }
}

impl FromStr for AugmentationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [AugmentationMode::Yaw, AugmentationMode::YawPitch, AugmentationMode::Pan]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown augmentation mode '{s}'"))
    }
}

/// Offsets are drawn uniformly from `[-bound, bound]` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRanges {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl AugmentRanges {
    pub fn new(yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> Self {
        Self {
            yaw_deg,
            pitch_deg,
            roll_deg,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        [self.yaw_deg, self.pitch_deg, self.roll_deg].map(|b| uniform(rng, (-b.abs(), b.abs())))
    }
}

/// Yaw about world up, then pitch, then roll, as intrinsic rotations.
pub fn offset_rotation([yaw, pitch, roll]: [f64; 3]) -> Rotation3 {
    Rotation3::from_yaw_pitch_roll(yaw.to_radians(), pitch.to_radians(), roll.to_radians())
}

pub fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Per-frame `[yaw, pitch, roll]` offsets in degrees for a clip of `frames`.
pub fn augment_offsets<R: Rng>(
    frames: usize,
    mode: AugmentationMode,
    ranges: &AugmentRanges,
    rng: &mut R,
) -> Vec<[f64; 3]> {
    match mode {
        AugmentationMode::Yaw => {
            let yaw = uniform(rng, (-ranges.yaw_deg.abs(), ranges.yaw_deg.abs()));
            vec![[yaw, 0.0, 0.0]; frames]
        }
        AugmentationMode::YawPitch => {
            let [yaw, pitch, _] = ranges.draw(rng);
            vec![[yaw, pitch, 0.0]; frames]
        }
        AugmentationMode::Pan => {
            let start = ranges.draw(rng);
            let end = ranges.draw(rng);
            (0..frames)
                .map(|i| {
                    if i + 1 == frames && frames > 1 {
                        return end;
                    }
                    let t = if frames > 1 { i as f64 / (frames - 1) as f64 } else { 0.0 };
                    let s = smoothstep(t);
                    [0, 1, 2].map(|k| start[k] + (end[k] - start[k]) * s)
                })
                .collect()
        }
    }
}

/// Composes sampled offsets onto the base rotations: `R_offset · base_i`.
pub fn augment_rotations<R: Rng>(
    base: &[Rotation3],
    mode: AugmentationMode,
    ranges: &AugmentRanges,
    rng: &mut R,
) -> Vec<Rotation3> {
    augment_offsets(base.len(), mode, ranges, rng)
        .into_iter()
        .zip(base)
        .map(|(o, b)| offset_rotation(o) * *b)
        .collect()
}

/// Keeps the panorama position and replaces the orientation with
/// `R_erp · R_aug`.
pub fn compose_virtual_pose(erp_pose: &Pose, r_aug: &Rotation3) -> Pose {
    Pose::new(erp_pose.rotation * *r_aug, erp_pose.translation)
}

/// Rendered frame with its per-pixel validity.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub image: Image,
    pub mask: Vec<bool>,
}

impl RenderedView {
    pub fn valid_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }
}

/// Resamples an equirectangular frame into the camera `cam` whose rays are
/// rotated into the panorama frame by `r_aug`. Pixels outside the lens
/// image are black and masked out.
pub fn render_view(erp: &Image, cam: &CameraModel, r_aug: &Rotation3) -> Result<RenderedView, SynthesisError> {
    if erp.width == 0 || erp.height == 0 {
        return Err(SynthesisError::Empty("panorama"));
    }
    let sphere = CameraModel::erp(erp.width as u32, erp.height as u32)?;
    let grid = Grid::from_fn_par(cam.width() as usize, cam.height() as usize, |x, y| {
        let d = cam.unproject_dir(PixelCoord::center(x, y)).ok()?;
        let p = sphere.project(&r_aug.rotate(&d)).ok()?;
        Some(erp.sample_bilinear(p.u - 0.5, p.v - 0.5, true))
    });
    Ok(RenderedView {
        mask: grid.iter().map(Option::is_some).collect(),
        image: Image::new(
            grid.width(),
            grid.height(),
            grid.iter().map(|p| p.unwrap_or([0.0; 3])).collect(),
        ),
    })
}

/// Equirectangular image whose pixel centers take the value `f(direction)`.
pub fn erp_from_fn<F>(width: usize, height: usize, f: F) -> Image
where
    F: Fn(&Vector3<f64>) -> [f32; 3] + Sync,
{
    let sphere = CameraModel::erp(width as u32, height as u32).expect("nonzero size");
    let grid = Grid::from_fn_par(width, height, |x, y| {
        let d = sphere
            .unproject_dir(PixelCoord::center(x, y))
            .expect("pixel centers are inside the panorama");
        f(&d)
    });
    Image::new(width, height, grid.into_vec())
}

/// Linear-interpolated percentile of `values`, `q ∈ [0, 1]`.
pub fn percentile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(values[lo] + (values[hi] - values[lo]) * (pos - lo as f64))
}

/// Near-plane scale: median over frames of the 25th percentile of each
/// frame's valid (finite, positive) depths.
pub fn scene_scale(depths: &[Raster]) -> Result<f64, SynthesisError> {
    let mut near: Vec<f64> = depths
        .iter()
        .filter_map(|d| {
            let mut valid: Vec<f64> = d
                .data()
                .iter()
                .map(|&v| v as f64)
                .filter(|v| v.is_finite() && *v > 0.0)
                .collect();
            percentile(&mut valid, 0.25)
        })
        .collect();
    percentile(&mut near, 0.5).ok_or(SynthesisError::NoValidDepth)
}

/// Divides translations by [`scene_scale`] so the typical near depth is 1.
pub fn normalize_scale(traj: &Trajectory, depths: &[Raster]) -> Result<Trajectory, SynthesisError> {
    if depths.len() != traj.frames.len() {
        return Err(SynthesisError::CountMismatch {
            what: "depth rasters",
            expected: traj.frames.len(),
            got: depths.len(),
        });
    }
    let s = scene_scale(depths)?;
    let mut out = traj.clone();
    for f in &mut out.frames {
        f.pose.translation /= s;
    }
    Ok(out)
}
