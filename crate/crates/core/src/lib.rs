//! Camera geometry and camera-aware positional encodings.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: rotations, poses, rays and Plücker coordinates.
//! * [`cameras`]: pinhole, UCM and equirectangular projection models.
//! * [`encodings`]: ray frames, Lat-Up maps, RoPE angles and per-token operators.
//! * [`attention`]: multi-head attention with operator injection and the
//!   spatial adapter.
//! * [`synthesis`]: panorama-to-camera rendering and pose augmentation.
//! * [`metrics`]: trajectory and calibration error metrics.
//! * [`raster`]: the CRAYRAST float raster format and image helpers.

pub mod attention;
pub mod cameras;
pub mod encodings;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod metrics;
pub mod raster;
pub mod synthesis;

pub use cameras::{CameraModel, PixelCoord};
pub use geometry::{Pose, Ray, Rotation3};
pub use grid::Grid;
