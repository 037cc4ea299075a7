//! Particle-filter localization core.
//!
//! The pieces compose bottom-up: an [`OccupancyGrid`](map::OccupancyGrid) is
//! loaded from an image plus metadata sidecar, ray casting against it is
//! precomputed into a [`RangeLut`](raycast::RangeLut), odometry increments are
//! propagated through one of the [`motion`] models, and particles are scored by
//! the [`sensor`] beam model over a selected set of scanlines. The [`filter`]
//! module ties these into the predict / update / resample loop.

pub mod filter;
pub mod geometry;
pub mod map;
pub mod motion;
pub mod raycast;
pub mod rng;
pub mod sensor;

pub use geometry::{normalize_angle, Pose2D};
pub use map::{CellState, GridCell, OccupancyGrid};
