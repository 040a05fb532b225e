//! File plumbing shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use camray_core::cameras::{CameraModel, CameraSpec};
use camray_core::geometry::Pose;
use camray_core::metrics::Trajectory;
use camray_core::raster::{Image, Raster};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{input, io_error, CliError, CliResult};

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| io_error(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| io_error(path, e))
}

pub fn read_trajectory(path: &Path) -> CliResult<Trajectory> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| io_error(path, e))?;
    Trajectory::from_json(text).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn read_camera(path: &Path) -> CliResult<CameraModel> {
    let spec: CameraSpec = read_json(path)?;
    CameraModel::try_from(spec).map_err(|e| CliError::from(e).context(path.display()))
}

#[derive(Deserialize)]
struct PoseFile {
    #[serde(rename = "T_wc")]
    t_wc: Vec<f64>,
}

/// `{"T_wc": [16 row-major values]}`.
pub fn read_pose(path: &Path) -> CliResult<Pose> {
    let raw: PoseFile = read_json(path)?;
    Pose::from_row_major(&raw.t_wc).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn read_image(path: &Path) -> CliResult<Image> {
    Image::load_png(path).map_err(|e| io_error(path, e))
}

pub fn read_raster(path: &Path) -> CliResult<Raster> {
    Raster::load(path).map_err(|e| io_error(path, e))
}

/// Files in `dir` with the given extension, sorted by name.
pub fn list_files(dir: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(input(format!("{}: no .{ext} files", dir.display())));
    }
    Ok(files)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_bytes(path, to_json(value).as_bytes())
}

/// `PREFIX` + `suffix`, keeping any directory part of the prefix.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to generated artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub inputs: Vec<InputHash>,
    pub command: Vec<String>,
}

impl RunManifest {
    pub fn new(seed: Option<u64>) -> Self {
        let command = std::iter::once("camray".to_string()).chain(std::env::args().skip(1)).collect();
        Self {
            tool: "camray",
            version: env!("CARGO_PKG_VERSION"),
            seed,
            inputs: Vec::new(),
            command,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let digest = Sha256::digest(read_bytes(path)?);
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: hex::encode(digest.as_slice()),
        });
        Ok(())
    }

    pub fn add_inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a PathBuf>) -> CliResult<()> {
        paths.into_iter().try_for_each(|p| self.add_input(p))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }
}
