//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use camray_core::cameras::CameraModel;
use camray_core::encodings::{EncodingKind, TokenOperator};
use camray_core::geometry::{Pose, Rotation3};
use camray_core::PixelCoord;
use nalgebra::{DMatrix, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3 {
    Rotation3::from_yaw_pitch_roll(rng.gen_range(-PI..PI), rng.gen_range(-1.5..1.5), rng.gen_range(-PI..PI))
}

pub fn random_pose(rng: &mut ChaCha8Rng, reach: f64) -> Pose {
    Pose::new(
        random_rotation(rng),
        Vector3::new(
            rng.gen_range(-reach..reach),
            rng.gen_range(-reach..reach),
            rng.gen_range(-reach..reach),
        ),
    )
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Textbook pinhole ray through a pixel: `normalize((u−cx)/f, (v−cy)/f, 1)`
/// with `f = (W/2) / tan(xfov/2)`.
pub fn pinhole_direction(xfov_deg: f64, width: u32, height: u32, u: f64, v: f64) -> Vector3<f64> {
    let f = (width as f64 / 2.0) / (xfov_deg.to_radians() / 2.0).tan();
    Vector3::new((u - width as f64 / 2.0) / f, (v - height as f64 / 2.0) / f, 1.0).normalize()
}

/// Up direction by explicit finite rotation: tilt the world ray by `delta`
/// about `normalize(d × up)` and reproject.
pub fn up_by_rotation(cam: &CameraModel, pose: &Pose, p: PixelCoord, delta: f64) -> Option<Vector2<f64>> {
    let d = pose.rotation.rotate(&cam.unproject_dir(p).ok()?);
    let axis = d.cross(&Vector3::new(0.0, -1.0, 0.0));
    if axis.norm() < 1e-12 {
        return None;
    }
    let tilt = Rotation3::from_axis_angle(&axis.normalize(), delta).ok()?;
    let q = cam.project(&(pose.rotation.matrix().transpose() * tilt.rotate(&d))).ok()?;
    Some(Vector2::new(q.u - p.u, q.v - p.v).normalize())
}

/// Up direction from a symmetric finite difference of `±h` tilts.
pub fn up_by_central_difference(cam: &CameraModel, pose: &Pose, p: PixelCoord, h: f64) -> Option<Vector2<f64>> {
    let d = pose.rotation.rotate(&cam.unproject_dir(p).ok()?);
    let axis = d.cross(&Vector3::new(0.0, -1.0, 0.0));
    if axis.norm() < 1e-12 {
        return None;
    }
    let k = axis.normalize();
    let at = |a: f64| -> Option<PixelCoord> {
        let r = Rotation3::from_axis_angle(&k, a).ok()?;
        cam.project(&(pose.rotation.matrix().transpose() * r.rotate(&d))).ok()
    };
    let (fwd, back) = (at(h)?, at(-h)?);
    Some(Vector2::new(fwd.u - back.u, fwd.v - back.v).normalize())
}

pub fn angle_between(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x * b.y - a.y * b.x).atan2(a.dot(b)).abs()
}

/// Longitude / latitude of a direction in the y-down panorama frame.
pub fn lon_lat(d: &Vector3<f64>) -> (f64, f64) {
    (d.x.atan2(d.z), d.y.atan2(d.x.hypot(d.z)))
}

/// Two-tone checkerboard on the sphere with `cells` squares per half turn.
pub fn checker(d: &Vector3<f64>, cells: f64) -> [f32; 3] {
    let (lon, lat) = lon_lat(d);
    let step = PI / cells;
    let parity = ((lon / step).floor() + (lat / step).floor()).rem_euclid(2.0);
    if parity == 0.0 {
        [0.1, 0.2, 0.3]
    } else {
        [0.9, 0.8, 0.7]
    }
}

/// Smooth function of direction (no seams or pole singularities).
pub fn smooth(d: &Vector3<f64>) -> [f32; 3] {
    [
        (0.5 + 0.3 * (7.0 * d.x + 0.5).sin() * (5.0 * d.z).cos()) as f32,
        (0.5 + 0.35 * (6.0 * d.y - 4.0 * d.x).sin()) as f32,
        (0.5 + 0.25 * (5.0 * d.x * d.y + 8.0 * d.z).cos()) as f32,
    ]
}

/// Attention written with dense matrices: build each token's full operator,
/// stack them into `blkdiag(D_1..D_T)` and transform the flattened per-head
/// features with it directly.
pub fn dense_attention(
    q: &DMatrix<f64>,
    k: &DMatrix<f64>,
    v: &DMatrix<f64>,
    ops: &[TokenOperator],
    kind: EncodingKind,
    heads: usize,
) -> DMatrix<f64> {
    let (t, d) = q.shape();
    let dh = d / heads;
    let mut big = DMatrix::<f64>::identity(t * dh, t * dh);
    if kind != EncodingKind::None {
        for (i, op) in ops.iter().enumerate() {
            let o = i * dh;
            let ray = op.layout.ray_dims;
            for b in 0..ray / 4 {
                for r in 0..4 {
                    for c in 0..4 {
                        big[(o + 4 * b + r, o + 4 * b + c)] = op.ray_block[(r, c)];
                    }
                }
            }
            for (p, a) in op.rope_angles.iter().enumerate() {
                let j = o + ray + 2 * p;
                big[(j, j)] = a.cos();
                big[(j, j + 1)] = -a.sin();
                big[(j + 1, j)] = a.sin();
                big[(j + 1, j + 1)] = a.cos();
            }
        }
    }
    let big_inv = big.clone().try_inverse().expect("operators are invertible");
    let flat = |m: &DMatrix<f64>, h: usize| DMatrix::from_fn(t * dh, 1, |i, _| m[(i / dh, h * dh + i % dh)]);
    let mut out = DMatrix::zeros(t, d);
    for h in 0..heads {
        let qh = big.transpose() * flat(q, h);
        let kh = &big_inv * flat(k, h);
        let vh = if kind.transforms_values() { &big_inv * flat(v, h) } else { flat(v, h) };
        let mut o = DMatrix::zeros(t * dh, 1);
        for i in 0..t {
            let logits: Vec<f64> = (0..t)
                .map(|j| (0..dh).map(|c| qh[i * dh + c] * kh[j * dh + c]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = w.iter().sum();
            for c in 0..dh {
                o[i * dh + c] = (0..t).map(|j| w[j] / z * vh[j * dh + c]).sum();
            }
        }
        if kind.transforms_values() {
            o = &big * o;
        }
        for i in 0..t * dh {
            out[(i / dh, h * dh + i % dh)] = o[i];
        }
    }
    out
}

/// Best yaw-constrained similarity on a fixed yaw grid. For each candidate
/// yaw the optimal scale and translation have closed forms.
pub fn grid_yaw_fit(src: &[Vector3<f64>], dst: &[Vector3<f64>], step_deg: f64) -> (f64, f64) {
    let n = src.len() as f64;
    let ms = src.iter().sum::<Vector3<f64>>() / n;
    let md = dst.iter().sum::<Vector3<f64>>() / n;
    let var: f64 = src.iter().map(|p| (p - ms).norm_squared()).sum();
    let steps = (360.0 / step_deg).round() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..steps {
        let yaw = (-180.0 + i as f64 * step_deg).to_radians();
        let r = Rotation3::rot_y(yaw);
        let corr: f64 = src.iter().zip(dst).map(|(a, b)| (b - md).dot(&r.rotate(&(a - ms)))).sum();
        let s = (corr / var).max(1e-12);
        let t = md - s * r.rotate(&ms);
        let sse: f64 = src.iter().zip(dst).map(|(a, b)| (b - (s * r.rotate(a) + t)).norm_squared()).sum();
        let rmse = (sse / n).sqrt();
        if rmse < best.0 {
            best = (rmse, yaw);
        }
    }
    best
}
