use std::fmt::Display;
use std::path::Path;

use camray_core::error::{
    AttentionError, CameraError, EncodingError, GeometryError, MetricsError, RasterError, SynthesisError,
};
use camray_core::metrics::TrajectoryParseError;
use thiserror::Error;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Missing, unreadable or malformed input; bad flags.
    #[error("{0}")]
    Input(String),
    /// Inputs parse but describe impossible geometry.
    #[error("{0}")]
    Geometry(String),
    /// The attention invariance suite found a deviation above tolerance.
    #[error("{0}")]
    Invariance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Geometry(_) => 3,
            CliError::Invariance(_) => 4,
        }
    }

    /// Prefixes the message with `context`, keeping the class.
    pub fn context(self, context: impl Display) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{context}: {m}")),
            CliError::Geometry(m) => CliError::Geometry(format!("{context}: {m}")),
            CliError::Invariance(m) => CliError::Invariance(format!("{context}: {m}")),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn input(msg: impl Display) -> CliError {
    CliError::Input(msg.to_string())
}

pub fn io_error(path: &Path, e: impl Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

impl From<CameraError> for CliError {
    fn from(e: CameraError) -> Self {
        CliError::Geometry(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::BadLength { .. } => CliError::Input(e.to_string()),
            _ => CliError::Geometry(e.to_string()),
        }
    }
}

impl From<EncodingError> for CliError {
    fn from(e: EncodingError) -> Self {
        match e {
            EncodingError::Camera(c) => c.into(),
            EncodingError::Geometry(g) => g.into(),
            EncodingError::UnsupportedModel(_) => CliError::Input(format!("unsupported model: {e}")),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<AttentionError> for CliError {
    fn from(e: AttentionError) -> Self {
        match e {
            AttentionError::Singular(_) => CliError::Geometry(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Camera(c) => c.into(),
            SynthesisError::NoValidDepth => CliError::Geometry(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Camera(c) => c.into(),
            MetricsError::Degenerate(_) => CliError::Geometry(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<TrajectoryParseError> for CliError {
    fn from(e: TrajectoryParseError) -> Self {
        match e {
            TrajectoryParseError::Pose { frame, source } => CliError::from(source).context(format!("frame {frame}")),
            TrajectoryParseError::Invalid(m) => m.into(),
            TrajectoryParseError::Json(_) => CliError::Input(e.to_string()),
        }
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        CliError::Input(e.to_string())
    }
}
