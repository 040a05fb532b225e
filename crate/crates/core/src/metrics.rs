//! Trajectory and calibration evaluation.
//!
//! Pose metrics compare relative trajectories `T_i = T_0⁻¹ T_i`, so a
//! world transform shared by both inputs cancels.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cameras::{rectify_map, CameraModel};
use crate::error::MetricsError;
use crate::geometry::{rotation_angle, world_up, Pose, Rotation3};
use crate::raster::Image;

pub const DEFAULT_SAMPLES: usize = 16;
/// Horizontal field of view cap used when rectifying for evaluation.
pub const RECTIFY_CAP_DEG: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryFrame {
    pub i: usize,
    /// Camera-to-world pose.
    pub pose: Pose,
}

/// Ordered camera-to-world poses with strictly increasing frame indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub frames: Vec<TrajectoryFrame>,
    pub timestamps: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    i: usize,
    #[serde(rename = "T_wc")]
    t_wc: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTrajectory {
    frames: Vec<RawFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamps: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(frames: Vec<TrajectoryFrame>) -> Result<Self, MetricsError> {
        if frames.is_empty() {
            return Err(MetricsError::EmptyTrajectory);
        }
        if let Some(k) = frames.windows(2).position(|w| w[1].i <= w[0].i) {
            return Err(MetricsError::UnorderedIndices(k + 1));
        }
        Ok(Self {
            frames,
            timestamps: None,
        })
    }

    /// Frames numbered `0..n` in order.
    pub fn from_poses(poses: impl IntoIterator<Item = Pose>) -> Result<Self, MetricsError> {
        Self::new(
            poses
                .into_iter()
                .enumerate()
                .map(|(i, pose)| TrajectoryFrame { i, pose })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> {
        self.frames.iter().map(|f| &f.pose)
    }

    /// Parses `{"frames": [{"i": 0, "T_wc": [16 floats, row-major]}]}`.
    pub fn from_json(s: &str) -> Result<Self, TrajectoryParseError> {
        let raw: RawTrajectory = serde_json::from_str(s)?;
        let frames = raw
            .frames
            .into_iter()
            .map(|f| {
                Ok(TrajectoryFrame {
                    i: f.i,
                    pose: Pose::from_row_major(&f.t_wc).map_err(|e| TrajectoryParseError::Pose { frame: f.i, source: e })?,
                })
            })
            .collect::<Result<Vec<_>, TrajectoryParseError>>()?;
        let mut traj = Self::new(frames)?;
        if let Some(ts) = raw.timestamps {
            if ts.len() != traj.len() {
                return Err(MetricsError::Mismatch {
                    what: "timestamps",
                    left: traj.len(),
                    right: ts.len(),
                }
                .into());
            }
            traj.timestamps = Some(ts);
        }
        Ok(traj)
    }

    pub fn to_json(&self) -> String {
        let raw = RawTrajectory {
            frames: self
                .frames
                .iter()
                .map(|f| RawFrame {
                    i: f.i,
                    t_wc: f.pose.to_row_major().to_vec(),
                })
                .collect(),
            timestamps: self.timestamps.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("trajectory serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryParseError {
    #[error("malformed trajectory JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("frame {frame}: {source}")]
    Pose {
        frame: usize,
        source: crate::error::GeometryError,
    },
    #[error(transparent)]
    Invalid(#[from] MetricsError),
}

pub fn relative_trajectory(traj: &Trajectory) -> Result<Vec<Pose>, MetricsError> {
    let first = traj.frames.first().ok_or(MetricsError::EmptyTrajectory)?.pose.inverse();
    Ok(traj.poses().map(|p| first * *p).collect())
}

/// `round(i·(n_frames−1)/(n_samples−1))` for `i < n_samples`, with halves
/// rounded up.
pub fn subsample_indices(n_frames: usize, n_samples: usize) -> Result<Vec<usize>, MetricsError> {
    if n_samples < 2 {
        return Err(MetricsError::TooFewFrames {
            needed: 2,
            got: n_samples,
        });
    }
    if n_frames < 2 {
        return Err(MetricsError::TooFewFrames {
            needed: 2,
            got: n_frames,
        });
    }
    let span = n_samples - 1;
    Ok((0..n_samples)
        .map(|i| (2 * i * (n_frames - 1) + span) / (2 * span))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseMetrics {
    pub rot_err_deg: f64,
    pub trans_err: f64,
    pub cam_mc: f64,
}

fn top_rows(p: &Pose) -> [f64; 12] {
    let mut out = [0.0; 12];
    out.copy_from_slice(&p.to_row_major()[..12]);
    out
}

/// Summed rotation, translation and flattened-pose errors over
/// `n_samples` uniformly spaced frames of the relative trajectories.
pub fn pose_metrics(gt: &Trajectory, pred: &Trajectory, n_samples: usize) -> Result<PoseMetrics, MetricsError> {
    if gt.len() != pred.len() {
        return Err(MetricsError::Mismatch {
            what: "frame count",
            left: gt.len(),
            right: pred.len(),
        });
    }
    let (g, p) = (relative_trajectory(gt)?, relative_trajectory(pred)?);
    let mut m = PoseMetrics {
        rot_err_deg: 0.0,
        trans_err: 0.0,
        cam_mc: 0.0,
    };
    for k in subsample_indices(gt.len(), n_samples)? {
        let (a, b) = (&g[k], &p[k]);
        m.rot_err_deg += rotation_angle(&a.rotation, &b.rotation).to_degrees();
        m.trans_err += (a.translation - b.translation).norm();
        let (va, vb) = (top_rows(a), top_rows(b));
        m.cam_mc += va.iter().zip(&vb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    }
    Ok(m)
}

/// Largest rotation angle, in degrees, between the first frame and any other.
pub fn rotation_score(traj: &Trajectory) -> Result<f64, MetricsError> {
    if traj.len() < 2 {
        return Err(MetricsError::TooFewFrames {
            needed: 2,
            got: traj.len(),
        });
    }
    let r0 = traj.frames[0].pose.rotation;
    Ok(traj.frames[1..]
        .iter()
        .map(|f| rotation_angle(&r0, &f.pose.rotation).to_degrees())
        .fold(0.0, f64::max))
}

/// Similarity `dst ≈ s·R_y(θ)·src + t` with rotation restricted to the
/// vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YawAlignment {
    pub scale: f64,
    /// Radians, rotation about the y axis.
    pub yaw: f64,
    pub translation: Vector3<f64>,
    pub rmse: f64,
}

impl YawAlignment {
    pub fn rotation(&self) -> Rotation3 {
        Rotation3::rot_y(self.yaw)
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * self.rotation().rotate(p) + self.translation
    }
}

/// Root mean square residual of `dst − (s·R_y(θ)·src + t)`.
pub fn alignment_rmse(src: &[Vector3<f64>], dst: &[Vector3<f64>], scale: f64, yaw: f64, t: &Vector3<f64>) -> f64 {
    let r = Rotation3::rot_y(yaw);
    let sum: f64 = src
        .iter()
        .zip(dst)
        .map(|(a, b)| (b - (scale * r.rotate(a) + t)).norm_squared())
        .sum();
    (sum / src.len() as f64).sqrt()
}

/// Closed-form least squares.
///
/// With centered points `a = src − μ_src`, `b = dst − μ_dst` and
/// `R_y(θ)·a = (c·aₓ + s·a_z, a_y, −s·aₓ + c·a_z)`, the correlation
/// `Σ bᵀR a = c·A + s·B + Σ b_y a_y` where `A = Σ(bₓaₓ + b_z a_z)` and
/// `B = Σ(bₓa_z − b_z aₓ)`. It peaks at `θ = atan2(B, A)`, the scale is
/// `(√(A²+B²) + Σ b_y a_y) / Σ‖a‖²`, and `t = μ_dst − s·R·μ_src`.
pub fn align_yaw_umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<YawAlignment, MetricsError> {
    if src.len() != dst.len() {
        return Err(MetricsError::Mismatch {
            what: "point count",
            left: src.len(),
            right: dst.len(),
        });
    }
    if src.len() < 2 {
        return Err(MetricsError::TooFewFrames {
            needed: 2,
            got: src.len(),
        });
    }
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vector3<f64>>() / n;
    let mu_d = dst.iter().sum::<Vector3<f64>>() / n;
    let (mut a_sum, mut b_sum, mut vertical, mut var) = (0.0, 0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let (a, b) = (s - mu_s, d - mu_d);
        a_sum += b.x * a.x + b.z * a.z;
        b_sum += b.x * a.z - b.z * a.x;
        vertical += b.y * a.y;
        var += a.norm_squared();
    }
    let spread = src.iter().map(|s| (s - mu_s).norm()).fold(0.0, f64::max);
    if var == 0.0 || spread <= 1e-12 * (1.0 + mu_s.norm()) {
        return Err(MetricsError::Degenerate("source points coincide"));
    }
    let yaw = b_sum.atan2(a_sum);
    let scale = (a_sum.hypot(b_sum) + vertical) / var;
    if !(scale > 0.0) {
        return Err(MetricsError::Degenerate("no positive scale fits"));
    }
    let translation = mu_d - scale * Rotation3::rot_y(yaw).rotate(&mu_s);
    Ok(YawAlignment {
        scale,
        yaw,
        translation,
        rmse: alignment_rmse(src, dst, scale, yaw, &translation),
    })
}

/// Per-frame orientation and per-clip lens parameters of a calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibEstimate {
    pub pitch_deg: Vec<f64>,
    pub roll_deg: Vec<f64>,
    pub fov_deg: f64,
    pub k1: f64,
    pub k2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibErrors {
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub fov_deg: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Wraps an angle difference to `[-180, 180)` degrees.
pub fn wrap_deg(a: f64) -> f64 {
    (a + 180.0).rem_euclid(360.0) - 180.0
}

pub fn calib_errors(gt: &CalibEstimate, pred: &CalibEstimate, reduce: Reduction) -> Result<CalibErrors, MetricsError> {
    for (what, l, r) in [
        ("pitch frames", gt.pitch_deg.len(), pred.pitch_deg.len()),
        ("roll frames", gt.roll_deg.len(), pred.roll_deg.len()),
    ] {
        if l != r {
            return Err(MetricsError::Mismatch { what, left: l, right: r });
        }
    }
    let agg = |a: &[f64], b: &[f64]| {
        let total: f64 = a.iter().zip(b).map(|(x, y)| wrap_deg(x - y).abs()).sum();
        match reduce {
            Reduction::Sum => total,
            Reduction::Mean if a.is_empty() => 0.0,
            Reduction::Mean => total / a.len() as f64,
        }
    };
    Ok(CalibErrors {
        pitch_deg: agg(&gt.pitch_deg, &pred.pitch_deg),
        roll_deg: agg(&gt.roll_deg, &pred.roll_deg),
        fov_deg: wrap_deg(gt.fov_deg - pred.fov_deg).abs(),
        k1: (gt.k1 - pred.k1).abs(),
        k2: (gt.k2 - pred.k2).abs(),
    })
}

/// Gravity-relative `(pitch, roll)` in degrees of a camera-to-world
/// rotation. Pitch is the elevation of the optical axis; roll is the
/// angle of the camera x axis against the horizon.
pub fn pitch_roll_deg(r_wc: &Rotation3) -> (f64, f64) {
    let m: &Matrix3<f64> = r_wc.matrix();
    let up = world_up();
    let forward = m.column(2).dot(&up).clamp(-1.0, 1.0);
    let x_up = m.column(0).dot(&up);
    let y_up = m.column(1).dot(&up);
    (forward.asin().to_degrees(), (-x_up).atan2(-y_up).to_degrees())
}

/// Per-frame pitch and roll of a trajectory, paired with given lens values.
pub fn orientation_estimate(traj: &Trajectory, fov_deg: f64, k1: f64, k2: f64) -> CalibEstimate {
    let (pitch_deg, roll_deg) = traj.poses().map(|p| pitch_roll_deg(&p.rotation)).unzip();
    CalibEstimate {
        pitch_deg,
        roll_deg,
        fov_deg,
        k1,
        k2,
    }
}

/// Rectified frames, their validity masks and the pinhole camera they use.
#[derive(Debug, Clone)]
pub struct Rectified {
    pub frames: Vec<Image>,
    pub mask: Vec<bool>,
    pub camera: CameraModel,
}

/// Resamples every frame into the capped pinhole view of `cam` with
/// bilinear interpolation. Pixels that map outside the source lens image
/// are black and masked.
pub fn prep_rectified(frames: &[Image], cam: &CameraModel, cap_deg: f64) -> Result<Rectified, MetricsError> {
    let map = rectify_map(cam, cap_deg)?;
    let (w, h) = (cam.width() as f64, cam.height() as f64);
    let lookup: Vec<Option<(f64, f64)>> = map
        .map
        .iter()
        .map(|p| {
            p.filter(|p| cam.contains_pixel(*p) && (0.0..=w).contains(&p.u) && (0.0..=h).contains(&p.v))
                .map(|p| (p.u - 0.5, p.v - 0.5))
        })
        .collect();
    let mut out = Vec::with_capacity(frames.len());
    for img in frames {
        if (img.width, img.height) != (cam.width() as usize, cam.height() as usize) {
            return Err(MetricsError::Mismatch {
                what: "frame pixels vs camera",
                left: (cam.width() * cam.height()) as usize,
                right: img.width * img.height,
            });
        }
        let data = lookup
            .iter()
            .map(|p| p.map_or([0.0; 3], |(x, y)| img.sample_bilinear(x, y, false)))
            .collect();
        out.push(Image::new(img.width, img.height, data));
    }
    Ok(Rectified {
        frames: out,
        mask: lookup.iter().map(Option::is_some).collect(),
        camera: map.dst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        Pose::new(
            Rotation3::from_yaw_pitch_roll(rng.gen_range(-PI..PI), rng.gen_range(-1.5..1.5), rng.gen_range(-PI..PI)),
            Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
        )
    }

    fn random_traj(rng: &mut ChaCha8Rng, n: usize) -> Trajectory {
        Trajectory::from_poses((0..n).map(|_| random_pose(rng))).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_traj(&mut rng, 5);
        let back = Trajectory::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(Trajectory::from_json(r#"{"frames":[]}"#).is_err());
        assert!(Trajectory::from_json(r#"{"frames":[{"i":0,"T_wc":[1,0,0]}]}"#).is_err());
        let unordered = r#"{"frames":[{"i":1,"T_wc":[1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1]},{"i":1,"T_wc":[1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1]}]}"#;
        assert!(matches!(
            Trajectory::from_json(unordered),
            Err(TrajectoryParseError::Invalid(MetricsError::UnorderedIndices(1)))
        ));
    }

    #[test]
    fn relative_starts_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_traj(&mut rng, 6);
        let rel = relative_trajectory(&t).unwrap();
        assert!((rel[0].to_matrix4() - Pose::identity().to_matrix4()).amax() < 1e-12);
        let again = relative_trajectory(&Trajectory::from_poses(rel.clone()).unwrap()).unwrap();
        for (a, b) in again.iter().zip(&rel) {
            assert!((a.to_matrix4() - b.to_matrix4()).amax() < 1e-12);
        }
    }

    #[test]
    fn subsample_formula() {
        assert_eq!(subsample_indices(16, 16).unwrap(), (0..16).collect::<Vec<_>>());
        assert_eq!(subsample_indices(81, 16).unwrap()[..4], [0, 5, 11, 16]);
        assert_eq!(*subsample_indices(48, 16).unwrap().last().unwrap(), 47);
        assert!(subsample_indices(10, 1).is_err());
    }

    #[test]
    fn translation_offset_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = Trajectory::from_poses((0..16).map(|i| Pose::new(Rotation3::rot_y(0.05 * i as f64), Vector3::zeros()))).unwrap();
        let _ = &mut rng;
        let shift = Vector3::new(0.1, 0.0, 0.0);
        // Offsetting every absolute translation cancels except through rotation.
        let offset_all = Trajectory::from_poses(gt.poses().map(|p| Pose::new(p.rotation, p.translation + shift))).unwrap();
        let m = pose_metrics(&gt, &offset_all, 16).unwrap();
        // T0⁻¹Ti translation becomes R0ᵀ(ti + δ − t0 − δ) = unchanged.
        assert!(m.trans_err < 1e-12);
        // Offsetting all frames but the first gives 15 terms of 0.1.
        let offset_tail = Trajectory::from_poses(
            gt.poses().enumerate().map(|(i, p)| Pose::new(p.rotation, p.translation + if i > 0 { shift } else { Vector3::zeros() })),
        )
        .unwrap();
        let m = pose_metrics(&gt, &offset_tail, 16).unwrap();
        assert_relative_eq!(m.trans_err, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn cam_mc_zero_iff_both_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gt = random_traj(&mut rng, 20);
        let m = pose_metrics(&gt, &gt, 16).unwrap();
        assert_eq!((m.rot_err_deg, m.trans_err, m.cam_mc), (0.0, 0.0, 0.0));
        let mut rot = gt.clone();
        rot.frames[19].pose.rotation = Rotation3::rot_x(0.01) * rot.frames[19].pose.rotation;
        let mut trans = gt.clone();
        trans.frames[19].pose.translation.y += 0.01;
        for pred in [rot, trans] {
            let m = pose_metrics(&gt, &pred, 16).unwrap();
            assert!(m.cam_mc > 0.0 && (m.rot_err_deg > 0.0 || m.trans_err > 0.0));
        }
    }

    #[test]
    fn rotation_score_examples() {
        let constant = Trajectory::from_poses((0..5).map(|i| Pose::new(Rotation3::rot_x(0.3), Vector3::new(i as f64, 0.0, 0.0)))).unwrap();
        assert!(rotation_score(&constant).unwrap() < 1e-12);
        let pair = Trajectory::from_poses([Pose::identity(), Pose::from_rotation(Rotation3::rot_y(15f64.to_radians()))]).unwrap();
        assert_relative_eq!(rotation_score(&pair).unwrap(), 15.0, epsilon = 1e-9);
        let spin = Trajectory::from_poses((0..=8).map(|i| Pose::from_rotation(Rotation3::rot_z((5.0 * i as f64).to_radians())))).unwrap();
        assert_relative_eq!(rotation_score(&spin).unwrap(), 40.0, epsilon = 1e-9);
        assert!(rotation_score(&Trajectory::from_poses([Pose::identity()]).unwrap()).is_err());
    }

    #[test]
    fn yaw_alignment_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src: Vec<Vector3<f64>> = (0..12)
            .map(|_| Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect();
        let same = align_yaw_umeyama(&src, &src).unwrap();
        assert_relative_eq!(same.scale, 1.0, epsilon = 1e-12);
        assert!(same.yaw.abs() < 1e-12 && same.translation.norm() < 1e-12 && same.rmse < 1e-12);
        let r = Rotation3::rot_y(30f64.to_radians());
        let t = Vector3::new(1.0, 0.0, 2.0);
        let dst: Vec<_> = src.iter().map(|p| 2.0 * r.rotate(p) + t).collect();
        let fit = align_yaw_umeyama(&src, &dst).unwrap();
        assert_relative_eq!(fit.scale, 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.yaw.to_degrees(), 30.0, epsilon = 1e-10);
        assert_relative_eq!(fit.translation, t, epsilon = 1e-12);
        assert!(fit.rmse <= 1e-9);
        let lifted: Vec<_> = src.iter().map(|p| p + Vector3::new(0.0, 5.0, 0.0)).collect();
        let fit = align_yaw_umeyama(&src, &lifted).unwrap();
        assert!(fit.yaw.abs() < 1e-12);
        assert_relative_eq!(fit.translation, Vector3::new(0.0, 5.0, 0.0), epsilon = 1e-12);
        assert!(matches!(
            align_yaw_umeyama(&[Vector3::x(); 3], &src[..3]),
            Err(MetricsError::Degenerate(_))
        ));
    }

    #[test]
    fn calib_examples() {
        let gt = CalibEstimate {
            pitch_deg: vec![179.0, 10.0],
            roll_deg: vec![0.0, 5.0],
            fov_deg: 120.0,
            k1: 0.1,
            k2: -0.02,
        };
        let z = calib_errors(&gt, &gt, Reduction::Mean).unwrap();
        assert_eq!((z.pitch_deg, z.roll_deg, z.fov_deg, z.k1, z.k2), (0.0, 0.0, 0.0, 0.0, 0.0));
        let pred = CalibEstimate {
            pitch_deg: vec![-179.0, 10.0],
            roll_deg: vec![3.0, 8.0],
            fov_deg: 110.0,
            k1: 0.15,
            k2: -0.02,
        };
        let e = calib_errors(&gt, &pred, Reduction::Mean).unwrap();
        assert_relative_eq!(e.pitch_deg, 1.0, epsilon = 1e-12);
        assert_relative_eq!(e.roll_deg, 3.0, epsilon = 1e-12);
        assert_relative_eq!(e.fov_deg, 10.0);
        assert_relative_eq!(e.k1, 0.05, epsilon = 1e-12);
        let s = calib_errors(&gt, &pred, Reduction::Sum).unwrap();
        assert_relative_eq!(s.pitch_deg, 2.0, epsilon = 1e-12);
        let short = CalibEstimate { roll_deg: vec![1.0], ..gt.clone() };
        assert!(calib_errors(&gt, &short, Reduction::Mean).is_err());
    }

    #[test]
    fn pitch_roll_extraction() {
        let (p, r) = pitch_roll_deg(&Rotation3::identity());
        assert!(p.abs() < 1e-12 && r.abs() < 1e-12);
        let (_, r) = pitch_roll_deg(&Rotation3::rot_z(25f64.to_radians()));
        assert_relative_eq!(r, 25.0, epsilon = 1e-9);
        // Tilting the optical axis toward world up (−y) raises pitch.
        let (p, _) = pitch_roll_deg(&Rotation3::rot_x(20f64.to_radians()));
        assert_relative_eq!(p, 20.0, epsilon = 1e-9);
        let (p, r) = pitch_roll_deg(&Rotation3::from_yaw_pitch_roll(1.0, 0.3, -0.2));
        assert_relative_eq!(p, 0.3f64.to_degrees(), epsilon = 1e-9);
        assert_relative_eq!(r, -0.2f64.to_degrees(), epsilon = 1e-9);
    }

    #[test]
    fn pinhole_rectification_is_identity() {
        let cam = CameraModel::ucm(90.0, 0.0, 24, 16).unwrap();
        let img = Image::new(24, 16, (0..24 * 16).map(|i| [(i % 7) as f32 / 7.0, (i % 3) as f32 / 3.0, 0.5]).collect());
        let out = prep_rectified(&[img.clone()], &cam, RECTIFY_CAP_DEG).unwrap();
        assert!(out.mask.iter().all(|&m| m));
        for (a, b) in out.frames[0].data.iter().zip(&img.data) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-6);
            }
        }
        assert_eq!(out.camera.xfov_deg(), Some(90.0));
    }

    proptest! {
        #[test]
        fn metrics_invariant_to_shared_world_transform(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = random_traj(&mut rng, 17);
            let pred = random_traj(&mut rng, 17);
            let g = random_pose(&mut rng);
            let moved = |t: &Trajectory| Trajectory::from_poses(t.poses().map(|p| g * *p)).unwrap();
            let a = pose_metrics(&gt, &pred, 16).unwrap();
            let b = pose_metrics(&moved(&gt), &moved(&pred), 16).unwrap();
            prop_assert!((a.rot_err_deg - b.rot_err_deg).abs() <= 1e-9);
            prop_assert!((a.trans_err - b.trans_err).abs() <= 1e-9);
            prop_assert!((a.cam_mc - b.cam_mc).abs() <= 1e-9);
            let r = Pose::from_rotation(g.rotation);
            let spun = Trajectory::from_poses(gt.poses().map(|p| r * *p)).unwrap();
            prop_assert!((rotation_score(&gt).unwrap() - rotation_score(&spun).unwrap()).abs() <= 1e-9);
        }

        #[test]
        fn yaw_fit_is_optimal(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let src: Vec<Vector3<f64>> = (0..8).map(|_| Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let dst: Vec<Vector3<f64>> = (0..8).map(|_| Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let Ok(fit) = align_yaw_umeyama(&src, &dst) else { return Ok(()) };
            for _ in 0..50 {
                let s = fit.scale * rng.gen_range(0.8..1.2);
                let yaw = fit.yaw + rng.gen_range(-0.2..0.2);
                let t = fit.translation + Vector3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                prop_assert!(fit.rmse <= alignment_rmse(&src, &dst, s, yaw, &t) + 1e-12);
            }
        }
    }
}
