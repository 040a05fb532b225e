//! Camera models: pinhole, Unified Camera Model (UCM) and equirectangular.
//!
//! Every model maps pixels to unit rays (`unproject`) and points back to
//! pixels (`project`). Pixel centers sit at `i + 0.5`, and the principal
//! point of the perspective models is always the image center.
//!
//! UCM is parameterized by horizontal field of view and `xi`. The focal
//! length follows from requiring the ray at `xfov / 2` to land on the
//! image's left/right border.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::CameraError;
use crate::geometry::{Pose, Ray};
use crate::grid::Grid;

/// Continuous pixel position, origin at the top-left image corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Center of pixel `(x, y)`.
    pub fn center(x: usize, y: usize) -> Self {
        Self::new(x as f64 + 0.5, y as f64 + 0.5)
    }

    pub fn max_abs_diff(&self, other: &PixelCoord) -> f64 {
        (self.u - other.u).abs().max((self.v - other.v).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lens {
    /// Shorthand for UCM with `xi = 0`.
    Pinhole { xfov_deg: f64 },
    Ucm { xfov_deg: f64, xi: f64 },
    Erp,
}

/// Lens plus image size. Construct through the validating constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraSpec", into = "CameraSpec")]
pub struct CameraModel {
    lens: Lens,
    width: u32,
    height: u32,
    focal: f64,
}

/// Focal length in pixels for a centered UCM camera of the given
/// horizontal field of view.
pub fn focal_from_fov(xfov_deg: f64, xi: f64, width: u32) -> Result<f64, CameraError> {
    let unrepresentable = CameraError::UnrepresentableFov { xfov_deg, xi };
    if !xfov_deg.is_finite() || !(xfov_deg > 0.0 && xfov_deg < 360.0) {
        return Err(unrepresentable);
    }
    if !xi.is_finite() || xi < 0.0 {
        return Err(CameraError::InvalidXi(xi));
    }
    let (s, c) = sin_cos_deg(xfov_deg / 2.0);
    if s <= 0.0 || c + xi <= 0.0 {
        return Err(unrepresentable);
    }
    Ok(width as f64 / 2.0 * ((c + xi) / s))
}

impl CameraModel {
    pub fn pinhole(xfov_deg: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        check_size(width, height)?;
        let focal = focal_from_fov(xfov_deg, 0.0, width)?;
        Ok(Self {
            lens: Lens::Pinhole { xfov_deg },
            width,
            height,
            focal,
        })
    }

    pub fn ucm(xfov_deg: f64, xi: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        check_size(width, height)?;
        let focal = focal_from_fov(xfov_deg, xi, width)?;
        Ok(Self {
            lens: Lens::Ucm { xfov_deg, xi },
            width,
            height,
            focal,
        })
    }

    pub fn erp(width: u32, height: u32) -> Result<Self, CameraError> {
        check_size(width, height)?;
        Ok(Self {
            lens: Lens::Erp,
            width,
            height,
            focal: f64::NAN,
        })
    }

    pub fn lens(&self) -> Lens {
        self.lens
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// `None` for equirectangular cameras.
    pub fn xfov_deg(&self) -> Option<f64> {
        match self.lens {
            Lens::Pinhole { xfov_deg } | Lens::Ucm { xfov_deg, .. } => Some(xfov_deg),
            Lens::Erp => None,
        }
    }

    pub fn xi(&self) -> f64 {
        match self.lens {
            Lens::Ucm { xi, .. } => xi,
            _ => 0.0,
        }
    }

    /// `None` for equirectangular cameras.
    pub fn focal(&self) -> Option<f64> {
        (!matches!(self.lens, Lens::Erp)).then_some(self.focal)
    }

    pub fn principal_point(&self) -> PixelCoord {
        PixelCoord::new(self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    /// True for pinhole cameras, including UCM with `xi = 0`.
    pub fn is_pinhole(&self) -> bool {
        match self.lens {
            Lens::Pinhole { .. } => true,
            Lens::Ucm { xi, .. } => xi == 0.0,
            Lens::Erp => false,
        }
    }

    /// Unit ray direction in the camera frame.
    pub fn unproject_dir(&self, p: PixelCoord) -> Result<Vector3<f64>, CameraError> {
        let out = CameraError::PixelOutOfModel { u: p.u, v: p.v };
        if !p.u.is_finite() || !p.v.is_finite() {
            return Err(out);
        }
        match self.lens {
            Lens::Erp => {
                let (w, h) = (self.width as f64, self.height as f64);
                if p.v < 0.0 || p.v > h {
                    return Err(out);
                }
                let lon = p.u / w * 2.0 * PI - PI;
                let lat = p.v / h * PI - PI / 2.0;
                let (sl, cl) = lat.sin_cos();
                let (so, co) = lon.sin_cos();
                Ok(Vector3::new(cl * so, sl, cl * co))
            }
            _ => {
                let c = self.principal_point();
                let x = (p.u - c.u) / self.focal;
                let y = (p.v - c.v) / self.focal;
                let xi = self.xi();
                let r2 = x * x + y * y;
                let disc = 1.0 + (1.0 - xi * xi) * r2;
                if disc < 0.0 {
                    return Err(out);
                }
                // Point on the unit sphere: (eta*x, eta*y, eta - xi).
                let eta = (xi + disc.sqrt()) / (1.0 + r2);
                let d = Vector3::new(eta * x, eta * y, eta - xi);
                Ok(d / d.norm())
            }
        }
    }

    /// Camera-frame ray through `p`. All supported models are central.
    pub fn unproject(&self, p: PixelCoord) -> Result<Ray, CameraError> {
        Ok(Ray {
            origin: Vector3::zeros(),
            direction: self.unproject_dir(p)?,
        })
    }

    /// Whether a camera-frame direction lies in the invertible part of the model.
    pub fn accepts_direction(&self, d: &Vector3<f64>) -> bool {
        let r = d.norm();
        if !(r > 0.0) || !r.is_finite() {
            return false;
        }
        match self.lens {
            Lens::Erp => true,
            _ => {
                let xi = self.xi();
                let cos_theta = d.z / r;
                // beta > 0, and for xi > 1 stay before the fold at cos(theta) = -1/xi.
                cos_theta + xi > 0.0 && (xi <= 1.0 || 1.0 + xi * cos_theta > 0.0)
            }
        }
    }

    pub fn project(&self, point: &Vector3<f64>) -> Result<PixelCoord, CameraError> {
        let out = CameraError::PointOutOfModel {
            x: point.x,
            y: point.y,
            z: point.z,
        };
        if !self.accepts_direction(point) {
            return Err(out);
        }
        match self.lens {
            Lens::Erp => {
                let lon = point.x.atan2(point.z);
                let lat = point.y.atan2(point.x.hypot(point.z));
                let mut u = (lon + PI) / (2.0 * PI);
                u -= u.floor();
                let v = (lat + PI / 2.0) / PI;
                Ok(PixelCoord::new(
                    u * self.width as f64,
                    v * self.height as f64,
                ))
            }
            _ => {
                let beta = point.z + self.xi() * point.norm();
                let c = self.principal_point();
                Ok(PixelCoord::new(
                    self.focal * point.x / beta + c.u,
                    self.focal * point.y / beta + c.v,
                ))
            }
        }
    }

    pub fn contains_pixel(&self, p: PixelCoord) -> bool {
        self.unproject_dir(p).is_ok()
    }
}

/// Sine and cosine of an angle in degrees, exact at multiples of 45°.
fn sin_cos_deg(deg: f64) -> (f64, f64) {
    use std::f64::consts::FRAC_1_SQRT_2;
    let a = deg.rem_euclid(360.0);
    let quadrant = (a / 90.0).floor();
    let r = a - 90.0 * quadrant;
    let (s, c) = if r == 0.0 {
        (0.0, 1.0)
    } else if r == 45.0 {
        (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
    } else {
        r.to_radians().sin_cos()
    };
    match quadrant as u8 {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

fn check_size(width: u32, height: u32) -> Result<(), CameraError> {
    if width == 0 || height == 0 {
        return Err(CameraError::EmptyImage { width, height });
    }
    Ok(())
}

/// JSON form of a camera: `{"model", "xfov_deg", "xi", "width", "height"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraSpec {
    pub model: ModelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xfov_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Ucm,
    Pinhole,
    Erp,
}

impl TryFrom<CameraSpec> for CameraModel {
    type Error = CameraError;

    fn try_from(spec: CameraSpec) -> Result<Self, CameraError> {
        let xfov = || {
            spec.xfov_deg.ok_or(CameraError::UnrepresentableFov {
                xfov_deg: f64::NAN,
                xi: spec.xi.unwrap_or(0.0),
            })
        };
        match spec.model {
            ModelName::Erp => CameraModel::erp(spec.width, spec.height),
            ModelName::Pinhole => CameraModel::pinhole(xfov()?, spec.width, spec.height),
            ModelName::Ucm => {
                CameraModel::ucm(xfov()?, spec.xi.unwrap_or(0.0), spec.width, spec.height)
            }
        }
    }
}

impl From<CameraModel> for CameraSpec {
    fn from(cam: CameraModel) -> Self {
        let (model, xfov_deg, xi) = match cam.lens {
            Lens::Pinhole { xfov_deg } => (ModelName::Pinhole, Some(xfov_deg), Some(0.0)),
            Lens::Ucm { xfov_deg, xi } => (ModelName::Ucm, Some(xfov_deg), Some(xi)),
            Lens::Erp => (ModelName::Erp, None, None),
        };
        CameraSpec {
            model,
            xfov_deg,
            xi,
            width: cam.width,
            height: cam.height,
        }
    }
}

/// World-frame ray through every pixel center; `None` outside the lens image.
pub fn ray_map(cam: &CameraModel, pose: &Pose) -> Grid<Option<Ray>> {
    Grid::from_fn_par(cam.width as usize, cam.height as usize, |x, y| {
        cam.unproject_dir(PixelCoord::center(x, y))
            .ok()
            .map(|d| Ray {
                origin: pose.translation,
                direction: pose.rotation.rotate(&d),
            })
    })
}

/// Lookup table from a rectified pinhole image back into its source image.
#[derive(Debug, Clone)]
pub struct RectifyMap {
    pub dst: CameraModel,
    /// Source pixel for each destination pixel center.
    pub map: Grid<Option<PixelCoord>>,
}

/// Builds the pinhole rectification of a UCM camera, capping the
/// horizontal field of view at `xfov_cap_deg`.
pub fn rectify_map(src: &CameraModel, xfov_cap_deg: f64) -> Result<RectifyMap, CameraError> {
    let src_xfov = match src.lens {
        Lens::Erp => return Err(CameraError::UnsupportedSource("UCM or pinhole")),
        Lens::Pinhole { xfov_deg } | Lens::Ucm { xfov_deg, .. } => xfov_deg,
    };
    if !(xfov_cap_deg > 0.0 && xfov_cap_deg < 180.0) {
        return Err(CameraError::InvalidCap(xfov_cap_deg));
    }
    let dst = CameraModel::pinhole(src_xfov.min(xfov_cap_deg), src.width, src.height)?;
    let map = Grid::from_fn_par(src.width as usize, src.height as usize, |x, y| {
        let d = dst.unproject_dir(PixelCoord::center(x, y)).ok()?;
        src.project(&d).ok()
    });
    Ok(RectifyMap { dst, map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation3;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const XIS: [f64; 7] = [0.0, 0.5, 0.95, 1.05, 1.5, 2.0, 2.3];
    const FOVS: [f64; 6] = [90.0, 110.0, 140.0, 160.0, 180.0, 200.0];

    #[test]
    fn focal_examples() {
        assert_eq!(focal_from_fov(90.0, 0.0, 832).unwrap(), 416.0);
        assert_relative_eq!(focal_from_fov(180.0, 1.0, 832).unwrap(), 416.0, epsilon = 1e-12);
        // (cos 70° + 0.95) / sin 70° * 416
        let f = focal_from_fov(140.0, 0.95, 832).unwrap();
        assert_relative_eq!(f, 571.9746731372207, epsilon = 1e-6);
        let cam = CameraModel::ucm(140.0, 0.95, 832, 832).unwrap();
        let edge = cam.unproject_dir(PixelCoord::new(832.0, 416.0)).unwrap();
        assert_relative_eq!(edge.z.acos().to_degrees(), 70.0, epsilon = 1e-9);
    }

    #[test]
    fn focal_domain_errors() {
        assert!(focal_from_fov(180.0, 0.0, 100).is_err());
        assert!(focal_from_fov(360.0, 2.0, 100).is_err());
        assert!(focal_from_fov(0.0, 0.5, 100).is_err());
        assert!(focal_from_fov(200.0, 0.1, 100).is_err());
        assert!(focal_from_fov(90.0, -0.1, 100).is_err());
        assert!(CameraModel::pinhole(90.0, 0, 10).is_err());
    }

    #[test]
    fn center_pixel_looks_forward() {
        for xi in XIS {
            let cam = CameraModel::ucm(120.0, xi, 832, 480).unwrap();
            let d = cam.unproject_dir(cam.principal_point()).unwrap();
            assert_eq!(d, Vector3::z());
            assert_eq!(cam.project(&Vector3::z()).unwrap(), cam.principal_point());
        }
        let erp = CameraModel::erp(2048, 1024).unwrap();
        let d = erp.unproject_dir(PixelCoord::new(1024.0, 512.0)).unwrap();
        assert_relative_eq!(d, Vector3::z(), epsilon = 1e-15);
    }

    #[test]
    fn pinhole_edge_is_45_degrees() {
        let cam = CameraModel::ucm(90.0, 0.0, 832, 832).unwrap();
        let d = cam.unproject_dir(PixelCoord::new(832.0, 416.0)).unwrap();
        let s = 0.5f64.sqrt();
        assert_relative_eq!(d, Vector3::new(s, 0.0, s), epsilon = 1e-15);
        let p = cam.project(&Vector3::new(1.0, 0.0, 1.0)).unwrap();
        assert_eq!((p.u, p.v), (832.0, 416.0));
    }

    #[test]
    fn erp_top_row_is_up() {
        let erp = CameraModel::erp(2048, 1024).unwrap();
        let p = erp.project(&Vector3::new(0.0, -1.0, 0.0)).unwrap();
        assert_eq!(p.v, 0.0);
        assert!(erp.unproject_dir(PixelCoord::new(10.0, -1.0)).is_err());
    }

    #[test]
    fn project_rejects_behind_and_origin() {
        let cam = CameraModel::ucm(90.0, 0.0, 100, 100).unwrap();
        assert!(cam.project(&Vector3::new(0.0, 0.0, -1.0)).is_err());
        assert!(cam.project(&Vector3::zeros()).is_err());
        let fish = CameraModel::ucm(200.0, 1.5, 100, 100).unwrap();
        // cos(theta) = -0.9 < -1/1.5 is past the fold.
        assert!(fish.project(&Vector3::new(0.436, 0.0, -0.9)).is_err());
        assert!(fish.project(&Vector3::new(0.8, 0.0, -0.6)).is_ok());
    }

    #[test]
    fn wide_lens_has_invalid_corners() {
        let cam = CameraModel::ucm(200.0, 1.5, 832, 832).unwrap();
        assert!(!cam.contains_pixel(PixelCoord::new(0.5, 0.5)));
        assert!(cam.contains_pixel(cam.principal_point()));
    }

    #[test]
    fn ray_map_applies_pose() {
        let cam = CameraModel::pinhole(90.0, 4, 4).unwrap();
        let ident = ray_map(&cam, &Pose::identity());
        for (x, y, r) in ident.indexed() {
            let expected = cam.unproject(PixelCoord::center(x, y)).unwrap();
            assert_eq!(r.unwrap(), expected);
        }
        let t = Vector3::new(1.0, 2.0, 3.0);
        let moved = ray_map(&cam, &Pose::from_translation(t));
        for (a, b) in moved.iter().zip(ident.iter()) {
            assert_eq!(a.unwrap().direction, b.unwrap().direction);
            assert_eq!(a.unwrap().origin, t);
        }
        let odd = CameraModel::pinhole(90.0, 3, 3).unwrap();
        let turned = ray_map(&odd, &Pose::from_rotation(Rotation3::rot_y(PI / 2.0)));
        assert_relative_eq!(turned.get(1, 1).unwrap().direction, Vector3::x(), epsilon = 1e-15);
    }

    #[test]
    fn pinhole_rectification_is_identity() {
        for cam in [
            CameraModel::pinhole(90.0, 64, 48).unwrap(),
            CameraModel::ucm(95.0, 0.0, 64, 48).unwrap(),
        ] {
            let r = rectify_map(&cam, 100.0).unwrap();
            assert_eq!(r.dst.xfov_deg(), cam.xfov_deg());
            for (x, y, p) in r.map.indexed() {
                assert!(p.unwrap().max_abs_diff(&PixelCoord::center(x, y)) <= 1e-6);
            }
        }
    }

    #[test]
    fn rectification_matches_per_pixel_composition() {
        let src = CameraModel::ucm(160.0, 1.5, 160, 90).unwrap();
        let r = rectify_map(&src, 100.0).unwrap();
        assert_eq!(r.dst.xfov_deg(), Some(100.0));
        let dst_f = 80.0 / 50f64.to_radians().tan();
        let y = 45;
        for x in 0..160 {
            // Independent pinhole lift followed by the UCM forward model.
            let (px, py) = ((x as f64 + 0.5 - 80.0) / dst_f, (y as f64 + 0.5 - 45.0) / dst_f);
            let d = Vector3::new(px, py, 1.0).normalize();
            let f_src = 80.0 * (80f64.to_radians().cos() + 1.5) / 80f64.to_radians().sin();
            let beta = d.z + 1.5;
            let expected = PixelCoord::new(f_src * d.x / beta + 80.0, f_src * d.y / beta + 45.0);
            let got = r.map.get(x, y).unwrap();
            assert!(got.max_abs_diff(&expected) < 1e-9, "x={x}: {got:?} vs {expected:?}");
        }
        assert!(rectify_map(&src, 180.0).is_err());
        assert!(rectify_map(&CameraModel::erp(8, 4).unwrap(), 90.0).is_err());
    }

    #[test]
    fn json_schema_round_trip() {
        let cam: CameraModel = serde_json::from_str(
            r#"{"model":"ucm","xfov_deg":140.0,"xi":0.95,"width":832,"height":480}"#,
        )
        .unwrap();
        assert_eq!(cam.xi(), 0.95);
        let back: CameraModel = serde_json::from_str(&serde_json::to_string(&cam).unwrap()).unwrap();
        assert_eq!(back, cam);
        let pin: CameraModel =
            serde_json::from_str(r#"{"model":"pinhole","xfov_deg":90,"width":8,"height":8}"#)
                .unwrap();
        assert!(pin.is_pinhole());
        let erp: CameraModel =
            serde_json::from_str(r#"{"model":"erp","xfov_deg":12,"xi":3,"width":8,"height":4}"#)
                .unwrap();
        assert_eq!(erp.lens(), Lens::Erp);
        assert!(serde_json::from_str::<CameraModel>(r#"{"model":"ucm","width":8,"height":4}"#)
            .is_err());
    }

    fn valid_cameras() -> Vec<CameraModel> {
        let mut out = vec![CameraModel::erp(640, 320).unwrap()];
        for xi in XIS {
            for fov in FOVS {
                if let Ok(c) = CameraModel::ucm(fov, xi, 832, 480) {
                    out.push(c);
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn unproject_then_project(cam_idx in 0usize..40, fu in 0.0..1.0f64, fv in 0.0..1.0f64) {
            let cams = valid_cameras();
            let cam = cams[cam_idx % cams.len()];
            let p = PixelCoord::new(fu * cam.width() as f64, fv * cam.height() as f64);
            if let Ok(d) = cam.unproject_dir(p) {
                prop_assert!((d.norm() - 1.0).abs() < 1e-12);
                let q = cam.project(&d).unwrap();
                prop_assert!(q.max_abs_diff(&p) <= 1e-4, "{:?} -> {:?}", p, q);
            }
        }

        #[test]
        fn project_then_unproject(cam_idx in 0usize..40, d in prop::array::uniform3(-1.0..1.0f64)) {
            let cams = valid_cameras();
            let cam = cams[cam_idx % cams.len()];
            let d = Vector3::from_column_slice(&d);
            prop_assume!(d.norm() > 1e-3);
            let d = d.normalize();
            // Keep clear of the model boundary where the inverse is ill-conditioned.
            let margin = match cam.lens() {
                Lens::Erp => d.y.abs() < 0.999,
                _ => {
                    let xi = cam.xi();
                    d.z + xi > 1e-3 && (xi <= 1.0 || 1.0 + xi * d.z > 1e-3)
                }
            };
            prop_assume!(margin);
            let p = cam.project(&d).unwrap();
            let back = cam.unproject_dir(p).unwrap();
            prop_assert!(back.dot(&d) >= 1.0 - 1e-9);
        }

        #[test]
        fn projection_is_scale_invariant(cam_idx in 0usize..40, d in prop::array::uniform3(-1.0..1.0f64), lambda in 0.01..100.0f64) {
            let cams = valid_cameras();
            let cam = cams[cam_idx % cams.len()];
            let d = Vector3::from_column_slice(&d);
            if let Ok(p) = cam.project(&d) {
                let q = cam.project(&(d * lambda)).unwrap();
                prop_assert!(p.max_abs_diff(&q) <= 1e-9 * (1.0 + p.u.abs().max(p.v.abs())));
            }
        }
    }

    #[test]
    fn erp_directions_cover_the_sphere() {
        let erp = CameraModel::erp(512, 256).unwrap();
        let rays = ray_map(&erp, &Pose::identity());
        let mut sum = Vector3::zeros();
        let mut weight = 0.0;
        for r in rays.iter() {
            let d = r.unwrap().direction;
            // cos(latitude) area weight
            let w = d.x.hypot(d.z);
            sum += d * w;
            weight += w;
        }
        assert!((sum / weight).norm() < 1e-3);
    }
}
