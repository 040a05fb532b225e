use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("matrix is not a rotation (|RᵀR − I| = {ortho:.3e}, det = {det:.9})")]
    NotARotation { ortho: f64, det: f64 },
    #[error("homogeneous matrix has an invalid last row")]
    NotRigid,
    #[error("rotation axis must be unit length, got norm {0}")]
    NonUnitAxis(f64),
    #[error("direction vector is zero or not finite")]
    DegenerateDirection,
    #[error("expected {expected} values, got {got}")]
    BadLength { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("image size must be at least 1×1, got {width}×{height}")]
    EmptyImage { width: u32, height: u32 },
    #[error("field of view {xfov_deg}° is not representable with xi = {xi}")]
    UnrepresentableFov { xfov_deg: f64, xi: f64 },
    #[error("invalid distortion parameter xi = {0}")]
    InvalidXi(f64),
    #[error("pixel ({u}, {v}) lies outside the lens image")]
    PixelOutOfModel { u: f64, v: f64 },
    #[error("point ({x}, {y}, {z}) cannot be projected")]
    PointOutOfModel { x: f64, y: f64, z: f64 },
    #[error("rectification requires a {0} source camera")]
    UnsupportedSource(&'static str),
    #[error("rectification cap {0}° must lie in (0, 180)")]
    InvalidCap(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("token {token} refers to camera {camera}, but only {count} cameras were given")]
    CameraIndex {
        token: usize,
        camera: usize,
        count: usize,
    },
    #[error("{cameras} cameras but {poses} poses")]
    CountMismatch { cameras: usize, poses: usize },
    #[error("projective encoding is limited to pinhole cameras (camera {0} is not)")]
    UnsupportedModel(usize),
    #[error("head dimension {head_dim} is incompatible with the {layout} layout")]
    Layout { head_dim: usize, layout: &'static str },
    #[error("up-map step {0} rad must lie in (0, 0.5]")]
    InvalidDelta(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("token operator {0} is not invertible")]
    Singular(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("no valid depth samples in any frame")]
    NoValidDepth,
    #[error("{what}: expected {expected}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("{what}: {left} vs {right}")]
    Mismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("frame indices must be strictly increasing (at position {0})")]
    UnorderedIndices(usize),
    #[error("alignment is degenerate: {0}")]
    Degenerate(&'static str),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("bad magic, not a CRAYRAST file")]
    BadMagic,
    #[error("unsupported CRAYRAST version {0}")]
    BadVersion(u32),
    #[error("payload holds {got} bytes, header implies {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("raster dimensions must be non-zero")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
