//! Camera positional encodings.
//!
//! Two families live here. Relative encodings produce one [`TokenOperator`]
//! per token, which attention applies to queries, keys and values so that
//! attention logits depend only on relative geometry. The Lat-Up map is an
//! absolute encoding of each ray's elevation and of the image-plane
//! direction that points toward world up.

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::cameras::{CameraModel, PixelCoord};
use crate::error::EncodingError;
use crate::geometry::{rodrigues, world_up, Pose, Ray, Rotation3};
use crate::grid::Grid;
use crate::raster::Raster;

/// Default Up-map rotation step in radians.
pub const DEFAULT_UP_DELTA: f64 = 0.1;
/// Default RoPE frequency base.
pub const DEFAULT_ROPE_BASE: f64 = 10_000.0;

const DEGENERATE: f64 = 1e-6;

/// Local frame of a ray: `z` along the ray, `y` roughly along camera-down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayFrame {
    /// Columns `[x, y, z]` expressed in world coordinates.
    pub rotation: Rotation3,
    pub origin: Vector3<f64>,
}

impl RayFrame {
    /// Ray-to-world transform `T^wr`.
    pub fn as_pose(&self) -> Pose {
        Pose::new(self.rotation, self.origin)
    }

    /// World-to-ray transform `T^rw`.
    pub fn world_to_ray(&self) -> Matrix4<f64> {
        self.as_pose().inverse().to_matrix4()
    }
}

fn try_axis(a: &Vector3<f64>, z: &Vector3<f64>) -> Option<Vector3<f64>> {
    let x = a.cross(z);
    let n = x.norm();
    (n >= DEGENERATE).then(|| x / n)
}

/// Builds the local frame of `ray` from the camera's down and right axes
/// (both in world coordinates).
///
/// Regular case: `x = down × z`, `y = z × x`. If the ray is parallel to
/// camera-down, `x = right × z` is used instead, then the world x-axis.
pub fn ray_frame(ray: &Ray, cam_down: &Vector3<f64>, cam_right: &Vector3<f64>) -> RayFrame {
    let z = ray.direction.normalize();
    let x = try_axis(cam_down, &z)
        .or_else(|| try_axis(cam_right, &z))
        .or_else(|| try_axis(&Vector3::x(), &z))
        .or_else(|| try_axis(&Vector3::y(), &z))
        .expect("two orthogonal axes cannot both be parallel to z");
    let y = z.cross(&x).normalize();
    RayFrame {
        rotation: Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])),
        origin: ray.origin,
    }
}

/// One image token: which frame/camera it belongs to and where it samples
/// the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub frame: usize,
    pub row: usize,
    pub col: usize,
    pub camera: usize,
    pub pixel: PixelCoord,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenGrid {
    pub tokens: Vec<Token>,
}

impl TokenGrid {
    pub fn new(tokens: Vec<Token>) -> Self {
        Self { tokens }
    }

    /// `frames × rows × cols` tokens sampling patch centers of a
    /// `width × height` image; token camera index equals its frame.
    pub fn patch_centers(frames: usize, rows: usize, cols: usize, width: u32, height: u32) -> Self {
        let (pw, ph) = (width as f64 / cols as f64, height as f64 / rows as f64);
        let mut tokens = Vec::with_capacity(frames * rows * cols);
        for frame in 0..frames {
            for row in 0..rows {
                for col in 0..cols {
                    tokens.push(Token {
                        frame,
                        row,
                        col,
                        camera: frame,
                        pixel: PixelCoord::new((col as f64 + 0.5) * pw, (row as f64 + 0.5) * ph),
                    });
                }
            }
        }
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn check(&self, cams: &[CameraModel], poses: &[Pose]) -> Result<(), EncodingError> {
        if cams.len() != poses.len() {
            return Err(EncodingError::CountMismatch {
                cameras: cams.len(),
                poses: poses.len(),
            });
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.camera >= cams.len() {
                return Err(EncodingError::CameraIndex {
                    token: i,
                    camera: t.camera,
                    count: cams.len(),
                });
            }
        }
        Ok(())
    }
}

/// Ray frame of a single pixel seen by a posed camera.
pub fn pixel_ray_frame(cam: &CameraModel, pose: &Pose, pixel: PixelCoord) -> Option<RayFrame> {
    let d = cam.unproject_dir(pixel).ok()?;
    let ray = Ray {
        origin: pose.translation,
        direction: pose.rotation.rotate(&d),
    };
    let down = pose.rotation.rotate(&Vector3::y());
    let right = pose.rotation.rotate(&Vector3::x());
    Some(ray_frame(&ray, &down, &right))
}

/// Per-token world-to-ray transforms `T^rw`; `None` for tokens whose pixel
/// lies outside the lens image.
pub fn ray_operators(
    cams: &[CameraModel],
    poses: &[Pose],
    grid: &TokenGrid,
) -> Result<Vec<Option<Matrix4<f64>>>, EncodingError> {
    grid.check(cams, poses)?;
    Ok(grid
        .tokens
        .iter()
        .map(|t| {
            pixel_ray_frame(&cams[t.camera], &poses[t.camera], t.pixel).map(|f| f.world_to_ray())
        })
        .collect())
}

/// Elevation of a world direction above the horizontal plane (y-down world).
pub fn latitude(d: &Vector3<f64>) -> f64 {
    (-d.y).atan2(d.x.hypot(d.z))
}

pub fn latitude_map(cam: &CameraModel, pose: &Pose) -> Grid<Option<f64>> {
    Grid::from_fn_par(cam.width() as usize, cam.height() as usize, |x, y| {
        let d = cam.unproject_dir(PixelCoord::center(x, y)).ok()?;
        Some(latitude(&pose.rotation.rotate(&d)))
    })
}

fn check_delta(delta: f64) -> Result<(), EncodingError> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(EncodingError::InvalidDelta(delta));
    }
    Ok(())
}

/// Image-plane direction in which `pixel` moves when its world ray is
/// tilted by `delta` toward world up. `None` when the ray is parallel to
/// world up or the tilted ray leaves the lens model.
pub fn up_vector(
    cam: &CameraModel,
    pose: &Pose,
    pixel: PixelCoord,
    delta: f64,
) -> Option<Vector2<f64>> {
    let d_cam = cam.unproject_dir(pixel).ok()?;
    let d = pose.rotation.rotate(&d_cam);
    let k = d.cross(&world_up());
    let kn = k.norm();
    if kn < DEGENERATE {
        return None;
    }
    let d_rot = rodrigues(&(k / kn), delta, &d).ok()?;
    let moved = cam
        .project(&pose.rotation.inverse().rotate(&d_rot))
        .ok()?;
    let mut du = moved.u - pixel.u;
    // Equirectangular images wrap horizontally; take the short way around.
    if cam.focal().is_none() {
        let w = cam.width() as f64;
        du -= w * (du / w).round();
    }
    let delta_px = Vector2::new(du, moved.v - pixel.v);
    let n = delta_px.norm();
    (n > 0.0 && n.is_finite()).then(|| delta_px / n)
}

pub fn up_map(
    cam: &CameraModel,
    pose: &Pose,
    delta: f64,
) -> Result<Grid<Option<Vector2<f64>>>, EncodingError> {
    check_delta(delta)?;
    Ok(Grid::from_fn_par(
        cam.width() as usize,
        cam.height() as usize,
        |x, y| up_vector(cam, pose, PixelCoord::center(x, y), delta),
    ))
}

/// Latitude and up direction, valid only where both are.
#[derive(Debug, Clone)]
pub struct LatUpMap {
    pub lat: Grid<Option<f64>>,
    pub up: Grid<Option<Vector2<f64>>>,
}

impl LatUpMap {
    pub fn compute(cam: &CameraModel, pose: &Pose, delta: f64) -> Result<Self, EncodingError> {
        Ok(Self {
            lat: latitude_map(cam, pose),
            up: up_map(cam, pose, delta)?,
        })
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.lat.get(x, y).is_some() && self.up.get(x, y).is_some()
    }

    /// Channels `(lat, up_u, up_v)`; NaN on invalid pixels. Returns the
    /// 1-channel validity mask alongside.
    pub fn to_raster(&self) -> (Raster, Raster) {
        let (w, h) = (self.lat.width(), self.lat.height());
        let mut data = Vec::with_capacity(w * h * 3);
        let mut mask = Vec::with_capacity(w * h);
        for (lat, up) in self.lat.iter().zip(self.up.iter()) {
            match (lat, up) {
                (Some(l), Some(u)) => {
                    data.extend([*l as f32, u.x as f32, u.y as f32]);
                    mask.push(1.0);
                }
                _ => {
                    data.extend([f32::NAN; 3]);
                    mask.push(0.0);
                }
            }
        }
        (
            Raster::new(h, w, 3, data).expect("sized above"),
            Raster::new(h, w, 1, mask).expect("sized above"),
        )
    }
}

/// Lat-Up raster of a posed camera sampled at pixel centers.
pub fn latup_raster(
    cam: &CameraModel,
    pose: &Pose,
    delta: f64,
) -> Result<(Raster, Raster), EncodingError> {
    Ok(LatUpMap::compute(cam, pose, delta)?.to_raster())
}

/// `(lat, up_u, up_v)` at each token's sample point.
pub fn latup_tokens(
    cams: &[CameraModel],
    poses: &[Pose],
    grid: &TokenGrid,
    delta: f64,
) -> Result<Vec<Option<[f64; 3]>>, EncodingError> {
    grid.check(cams, poses)?;
    check_delta(delta)?;
    Ok(grid
        .tokens
        .iter()
        .map(|t| {
            let (cam, pose) = (&cams[t.camera], &poses[t.camera]);
            let d = cam.unproject_dir(t.pixel).ok()?;
            let lat = latitude(&pose.rotation.rotate(&d));
            let up = up_vector(cam, pose, t.pixel, delta)?;
            Some([lat, up.x, up.y])
        })
        .collect())
}

/// Axial 2D RoPE angles for a token at grid position `(row, col)`.
///
/// `dims` feature dimensions form `dims / 2` rotation planes. The first
/// half of the planes rotate by `row · θ_j`, the second half by `col · θ_j`,
/// with `θ_j = base^(−2j / (dims / 2))`.
pub fn rope_angles(row: f64, col: f64, dims: usize, base: f64) -> Result<Vec<f64>, EncodingError> {
    if dims % 4 != 0 {
        return Err(EncodingError::Layout {
            head_dim: dims,
            layout: "axial rope",
        });
    }
    let axis_dim = dims / 2;
    let freqs: Vec<f64> = (0..axis_dim / 2)
        .map(|j| base.powf(-(2.0 * j as f64) / axis_dim as f64))
        .collect();
    Ok(freqs
        .iter()
        .map(|f| row * f)
        .chain(freqs.iter().map(|f| col * f))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    None,
    Cape,
    Gta,
    Prope,
    UcpeRay,
    UcpeHybrid,
}

impl EncodingKind {
    pub const ALL_ENCODED: [EncodingKind; 5] = [
        EncodingKind::Cape,
        EncodingKind::Gta,
        EncodingKind::Prope,
        EncodingKind::UcpeRay,
        EncodingKind::UcpeHybrid,
    ];

    /// Whether values are transformed as well (the GTA form).
    pub fn transforms_values(&self) -> bool {
        !matches!(self, EncodingKind::None | EncodingKind::Cape)
    }
}

/// How a head's feature dimension is split between 4×4 ray blocks and
/// 2×2 RoPE planes. Ray dims come first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorLayout {
    pub ray_dims: usize,
    pub rope_dims: usize,
}

impl OperatorLayout {
    pub fn pure_ray(head_dim: usize) -> Result<Self, EncodingError> {
        if head_dim == 0 || head_dim % 4 != 0 {
            return Err(EncodingError::Layout {
                head_dim,
                layout: "pure ray",
            });
        }
        Ok(Self {
            ray_dims: head_dim,
            rope_dims: 0,
        })
    }

    pub fn hybrid(head_dim: usize) -> Result<Self, EncodingError> {
        if head_dim == 0 || head_dim % 8 != 0 {
            return Err(EncodingError::Layout {
                head_dim,
                layout: "hybrid",
            });
        }
        Ok(Self {
            ray_dims: head_dim / 2,
            rope_dims: head_dim / 2,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.ray_dims + self.rope_dims
    }

    /// `(ray fraction, rope fraction)` of the head dimension.
    pub fn fractions(&self) -> (f64, f64) {
        let d = self.head_dim() as f64;
        (self.ray_dims as f64 / d, self.rope_dims as f64 / d)
    }
}

/// Block-diagonal per-token transform: `ray_dims / 4` copies of a 4×4
/// block followed by `rope_dims / 2` plane rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenOperator {
    pub ray_block: Matrix4<f64>,
    pub rope_angles: Vec<f64>,
    pub layout: OperatorLayout,
    /// False when the token's pixel is outside the lens image; the ray
    /// block is then the identity.
    pub valid: bool,
}

impl TokenOperator {
    pub fn identity(layout: OperatorLayout) -> Self {
        Self {
            ray_block: Matrix4::identity(),
            rope_angles: vec![0.0; layout.rope_dims / 2],
            layout,
            valid: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub rope_base: f64,
    /// Use the hybrid ray/RoPE split for the camera-level kinds
    /// (CaPE, GTA, PRoPE) as well.
    pub camera_rope: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            rope_base: DEFAULT_ROPE_BASE,
            camera_rope: false,
        }
    }
}

/// Intrinsics in normalized device coordinates: the image spans `[-1, 1]`
/// horizontally and vertically.
pub fn normalized_intrinsics(cam: &CameraModel) -> Option<Matrix3<f64>> {
    let f = cam.focal()?;
    let (w, h) = (cam.width() as f64, cam.height() as f64);
    let c = cam.principal_point();
    Some(Matrix3::new(
        2.0 * f / w,
        0.0,
        2.0 * c.u / w - 1.0,
        0.0,
        2.0 * f / h,
        2.0 * c.v / h - 1.0,
        0.0,
        0.0,
        1.0,
    ))
}

/// `[[K, 0], [0ᵀ, 1]] · T^cw`.
pub fn projective_block(pose_wc: &Pose, k: &Matrix3<f64>) -> Matrix4<f64> {
    let mut lift = Matrix4::identity();
    lift.fixed_view_mut::<3, 3>(0, 0).copy_from(k);
    lift * pose_wc.inverse().to_matrix4()
}

pub fn layout_for(
    kind: EncodingKind,
    head_dim: usize,
    opts: &BuildOptions,
) -> Result<OperatorLayout, EncodingError> {
    match kind {
        EncodingKind::UcpeHybrid => OperatorLayout::hybrid(head_dim),
        EncodingKind::Cape | EncodingKind::Gta | EncodingKind::Prope if opts.camera_rope => {
            OperatorLayout::hybrid(head_dim)
        }
        _ => OperatorLayout::pure_ray(head_dim),
    }
}

/// One operator per token for the given encoding kind and head dimension.
pub fn build_operators(
    kind: EncodingKind,
    cams: &[CameraModel],
    poses: &[Pose],
    grid: &TokenGrid,
    head_dim: usize,
    opts: &BuildOptions,
) -> Result<Vec<TokenOperator>, EncodingError> {
    grid.check(cams, poses)?;
    let layout = layout_for(kind, head_dim, opts)?;
    if kind == EncodingKind::Prope {
        if let Some(i) = cams.iter().position(|c| !c.is_pinhole()) {
            return Err(EncodingError::UnsupportedModel(i));
        }
    }
    let camera_blocks: Vec<Matrix4<f64>> = match kind {
        EncodingKind::Cape | EncodingKind::Gta => {
            poses.iter().map(|p| p.inverse().to_matrix4()).collect()
        }
        EncodingKind::Prope => cams
            .iter()
            .zip(poses)
            .map(|(c, p)| projective_block(p, &normalized_intrinsics(c).expect("pinhole")))
            .collect(),
        _ => Vec::new(),
    };
    grid.tokens
        .iter()
        .map(|t| {
            let rope_angles = if layout.rope_dims > 0 {
                rope_angles(t.row as f64, t.col as f64, layout.rope_dims, opts.rope_base)?
            } else {
                Vec::new()
            };
            let (ray_block, valid) = match kind {
                EncodingKind::None => (Matrix4::identity(), true),
                EncodingKind::Cape | EncodingKind::Gta | EncodingKind::Prope => {
                    (camera_blocks[t.camera], true)
                }
                EncodingKind::UcpeRay | EncodingKind::UcpeHybrid => {
                    match pixel_ray_frame(&cams[t.camera], &poses[t.camera], t.pixel) {
                        Some(f) => (f.world_to_ray(), true),
                        None => (Matrix4::identity(), false),
                    }
                }
            };
            Ok(TokenOperator {
                ray_block,
                rope_angles,
                layout,
                valid,
            })
        })
        .collect()
}
