//! Expected-range computation: an exact marching caster and a precomputed
//! `(x, y, θ)` lookup table with constant-time queries.

mod exact;
mod io;
mod lut;

pub use exact::{cast_exact, ExactCaster};
pub use io::{read_lut, write_lut, LUT_MAGIC, LUT_VERSION};
pub use lut::{build_lut, LutBuildReport, LutParams, RangeLut};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2D;

#[derive(Debug, Error)]
pub enum RaycastError {
    #[error("pose ({x:.3}, {y:.3}) is outside the map")]
    OutOfBounds { x: f64, y: f64 },
    #[error("lookup table needs {needed} bytes, over the {cap} byte cap")]
    MemoryCap { needed: u64, cap: u64 },
    #[error("invalid lookup table parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed lookup table file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Anything that can answer "how far does a ray travel from here".
pub trait RangeSource: Sync {
    /// Expected range from world point `(x, y)` along world angle `angle`,
    /// or `None` when the point is outside the map.
    fn expected_range(&self, x: f64, y: f64, angle: f64) -> Option<f64>;

    fn max_range(&self) -> f64;

    /// Whether `(x, y)` can be queried at all.
    fn contains(&self, x: f64, y: f64) -> bool;

    fn range_from(&self, pose: &Pose2D, bearing: f64) -> Result<f64, RaycastError> {
        self.expected_range(pose.x(), pose.y(), pose.theta() + bearing)
            .ok_or(RaycastError::OutOfBounds { x: pose.x(), y: pose.y() })
    }
}

/// Which range computation the sensor model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Lut,
    Exact,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Lut => "lut",
            BackendKind::Exact => "exact",
        })
    }
}

/// Concrete range backend, dispatched once per scan rather than per beam.
#[derive(Debug, Clone)]
pub enum RangeBackend {
    Lut(std::sync::Arc<RangeLut>),
    Exact(ExactCaster),
}

impl RangeBackend {
    pub fn kind(&self) -> BackendKind {
        match self {
            RangeBackend::Lut(_) => BackendKind::Lut,
            RangeBackend::Exact(_) => BackendKind::Exact,
        }
    }

    pub fn max_range(&self) -> f64 {
        match self {
            RangeBackend::Lut(l) => l.max_range(),
            RangeBackend::Exact(e) => e.max_range(),
        }
    }
}
