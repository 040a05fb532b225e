//! Rigid-body primitives shared by every other module.
//!
//! Frames follow the image convention: `x` right, `y` down, `z` forward.
//! World up is therefore `[0, -1, 0]`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Tolerance used when validating rotation matrices built from user data.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// World up direction in the y-down convention.
pub fn world_up() -> Vector3<f64> {
    Vector3::new(0.0, -1.0, 0.0)
}

/// A proper rotation stored as a 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps `m` after checking orthonormality and `det = +1` within `tol`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self, GeometryError> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if !m.iter().all(|v| v.is_finite()) || ortho > tol || (det - 1.0).abs() > tol {
            return Err(GeometryError::NotARotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Skips validation. Caller guarantees `m` is a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Rotation about a unit axis by `angle` radians.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self, GeometryError> {
        check_unit_axis(axis)?;
        let k = axis;
        let skew = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
        let (s, c) = angle.sin_cos();
        Ok(Self(
            Matrix3::identity() * c + skew * s + (k * k.transpose()) * (1.0 - c),
        ))
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Intrinsic yaw (about y), then pitch (about x), then roll (about z).
    pub fn from_yaw_pitch_roll(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self::rot_y(yaw) * Self::rot_x(pitch) * Self::rot_z(roll)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Frobenius norm of `mᵀm − I` and `|det − 1|`.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        (
            (self.0.transpose() * self.0 - Matrix3::identity()).norm(),
            (self.0.determinant() - 1.0).abs(),
        )
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;

    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

/// Rigid transform. For camera poses this is camera-to-world (`T^wc`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation3,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Rotation3, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation3::identity(), Vector3::zeros())
    }

    pub fn from_rotation(rotation: Rotation3) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), translation)
    }

    /// Reads a homogeneous matrix, validating the rotation block and last row.
    pub fn from_matrix4(m: &Matrix4<f64>) -> Result<Self, GeometryError> {
        let last = m.row(3);
        if (last[0].abs() + last[1].abs() + last[2].abs() + (last[3] - 1.0).abs()) > 1e-9 {
            return Err(GeometryError::NotRigid);
        }
        let rotation = Rotation3::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned(), 1e-6)?;
        let translation = m.fixed_view::<3, 1>(0, 3).into_owned();
        Ok(Self::new(rotation, translation))
    }

    /// Row-major 16 values, the layout used by the trajectory files.
    pub fn from_row_major(values: &[f64]) -> Result<Self, GeometryError> {
        if values.len() != 16 {
            return Err(GeometryError::BadLength {
                expected: 16,
                got: values.len(),
            });
        }
        Self::from_matrix4(&Matrix4::from_row_slice(values))
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix4();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation.inverse();
        Self::new(r_inv, -(r_inv.rotate(&self.translation)))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }
}

/// `a ∘ b`: apply `b` first, then `a`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::new(
        a.rotation * b.rotation,
        a.rotation.rotate(&b.translation) + a.translation,
    )
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        compose(&self, &rhs)
    }
}

/// A half-line with unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    /// Normalizes `direction`; fails on a zero or non-finite direction.
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Result<Self, GeometryError> {
        let n = direction.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(GeometryError::DegenerateDirection);
        }
        Ok(Self {
            origin,
            direction: direction / n,
        })
    }

    pub fn transformed(&self, pose: &Pose) -> Ray {
        Ray {
            origin: pose.transform_point(&self.origin),
            direction: pose.rotation.rotate(&self.direction),
        }
    }
}

/// Six-dimensional line coordinates `(d, o × d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PluckerCoords {
    pub direction: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl PluckerCoords {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.direction.x,
            self.direction.y,
            self.direction.z,
            self.moment.x,
            self.moment.y,
            self.moment.z,
        ]
    }
}

pub fn plucker(ray: &Ray) -> PluckerCoords {
    PluckerCoords {
        direction: ray.direction,
        moment: ray.origin.cross(&ray.direction),
    }
}

fn check_unit_axis(axis: &Vector3<f64>) -> Result<(), GeometryError> {
    let n = axis.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
        return Err(GeometryError::NonUnitAxis(n));
    }
    Ok(())
}

/// Rodrigues' rotation of `v` about a unit `axis` by `angle` radians.
pub fn rodrigues(
    axis: &Vector3<f64>,
    angle: f64,
    v: &Vector3<f64>,
) -> Result<Vector3<f64>, GeometryError> {
    check_unit_axis(axis)?;
    let (s, c) = angle.sin_cos();
    Ok(v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c)))
}

/// Geodesic angle between two rotations, in `[0, π]`.
pub fn rotation_angle(a: &Rotation3, b: &Rotation3) -> f64 {
    let r = a.matrix().transpose() * b.matrix();
    // atan2 keeps precision near 0 and π where acos of the trace does not.
    let sin2 = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    sin2.atan2(r.trace() - 1.0)
}
