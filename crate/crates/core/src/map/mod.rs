//! Occupancy-grid maps: loading, validation, and coordinate queries.
//!
//! Maps come as an 8-bit grayscale image (PGM or PNG) plus a YAML sidecar in
//! the usual robotics layout:
//!
//! ```yaml
//! image: track.pgm
//! resolution: 0.05
//! origin: [-3.0, -2.5, 0.0]
//! occupied_thresh: 0.65
//! free_thresh: 0.196
//! negate: 0
//! ```
//!
//! Image row 0 is the top of the map; grid row 0 is the bottom, so world `y`
//! grows upward.

mod distance;
mod io;

pub use distance::DistanceField;
pub use io::{load_map, load_map_from_meta, save_map, MapMeta, DEFAULT_FREE_THRESH, DEFAULT_OCCUPIED_THRESH};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2D;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to decode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("map image {path} is not 8-bit grayscale (found {color})")]
    NonGrayscale { path: PathBuf, color: String },
    #[error("invalid map metadata in {path}: {message}")]
    Metadata { path: PathBuf, message: String },
    #[error("thresholds must satisfy 0 <= free ({free}) < occupied ({occupied}) <= 1")]
    Thresholds { occupied: f64, free: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("cell ({ix}, {iy}) outside {width}x{height} grid")]
    OutOfBounds {
        ix: usize,
        iy: usize,
        width: usize,
        height: usize,
    },
}

/// Tri-state occupancy of a single cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Free = 0,
    Occupied = 1,
    Unknown = 2,
}

impl CellState {
    /// Whether a ray stops in this cell. Unknown space is treated as a wall so
    /// rays never escape through unmapped regions.
    #[inline]
    pub fn blocks_ray(self) -> bool {
        self != CellState::Free
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridCell {
    pub ix: usize,
    pub iy: usize,
}

impl GridCell {
    pub const fn new(ix: usize, iy: usize) -> Self {
        Self { ix, iy }
    }
}

/// World↔grid transform for a `width × height` grid. Shared by the map and the
/// range lookup table so both discretize positions identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFrame {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2D,
    cos: f64,
    sin: f64,
}

impl GridFrame {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2D) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::InvalidGrid(format!("dimensions must be positive, got {width}x{height}")));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(MapError::InvalidGrid(format!("resolution must be positive, got {resolution}")));
        }
        let (sin, cos) = origin.theta().sin_cos();
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cos,
            sin,
        })
    }

    /// Continuous position in cell units: cell `(i, j)` spans `[i, i+1) × [j, j+1)`.
    #[inline]
    pub fn cell_coords(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.origin.x();
        let dy = y - self.origin.y();
        let lx = self.cos * dx + self.sin * dy;
        let ly = -self.sin * dx + self.cos * dy;
        (lx / self.resolution, ly / self.resolution)
    }

    /// Grid-frame angle for a world-frame heading.
    #[inline]
    pub fn local_angle(&self, world_angle: f64) -> f64 {
        world_angle - self.origin.theta()
    }

    #[inline]
    pub fn world_to_grid(&self, x: f64, y: f64) -> Option<GridCell> {
        let (fx, fy) = self.cell_coords(x, y);
        self.cell_at(fx, fy)
    }

    #[inline]
    pub fn cell_at(&self, fx: f64, fy: f64) -> Option<GridCell> {
        let cx = fx.floor();
        let cy = fy.floor();
        if cx >= 0.0 && cy >= 0.0 && cx < self.width as f64 && cy < self.height as f64 {
            Some(GridCell::new(cx as usize, cy as usize))
        } else {
            None
        }
    }

    /// World coordinates of a cell center.
    pub fn grid_to_world(&self, cell: GridCell) -> (f64, f64) {
        let lx = (cell.ix as f64 + 0.5) * self.resolution;
        let ly = (cell.iy as f64 + 0.5) * self.resolution;
        (
            self.origin.x() + self.cos * lx - self.sin * ly,
            self.origin.y() + self.sin * lx + self.cos * ly,
        )
    }

    #[inline]
    pub fn index(&self, cell: GridCell) -> usize {
        cell.iy * self.width + cell.ix
    }

    #[inline]
    pub fn contains(&self, cell: GridCell) -> bool {
        cell.ix < self.width && cell.iy < self.height
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }
}

/// Immutable occupancy grid. Cells are stored row-major with row 0 at the
/// bottom of the map.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    frame: GridFrame,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        cells: Vec<CellState>,
    ) -> Result<Self, MapError> {
        let frame = GridFrame::new(width, height, resolution, origin)?;
        if cells.len() != width * height {
            return Err(MapError::InvalidGrid(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Self { frame, cells })
    }

    /// Grid filled with a single state.
    pub fn filled(width: usize, height: usize, resolution: f64, origin: Pose2D, state: CellState) -> Result<Self, MapError> {
        Self::new(width, height, resolution, origin, vec![state; width * height])
    }

    /// Builds a grid by evaluating `f` at every cell.
    pub fn from_fn(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        mut f: impl FnMut(GridCell) -> CellState,
    ) -> Result<Self, MapError> {
        let mut cells = Vec::with_capacity(width * height);
        for iy in 0..height {
            for ix in 0..width {
                cells.push(f(GridCell::new(ix, iy)));
            }
        }
        Self::new(width, height, resolution, origin, cells)
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn height(&self) -> usize {
        self.frame.height
    }

    pub fn resolution(&self) -> f64 {
        self.frame.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.frame.origin
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    /// Cell containing a world point, or `None` when it falls outside the grid.
    pub fn world_to_grid(&self, x: f64, y: f64) -> Option<GridCell> {
        self.frame.world_to_grid(x, y)
    }

    pub fn grid_to_world(&self, cell: GridCell) -> (f64, f64) {
        self.frame.grid_to_world(cell)
    }

    pub fn state(&self, cell: GridCell) -> Result<CellState, MapError> {
        if !self.frame.contains(cell) {
            return Err(MapError::OutOfBounds {
                ix: cell.ix,
                iy: cell.iy,
                width: self.width(),
                height: self.height(),
            });
        }
        Ok(self.cells[self.frame.index(cell)])
    }

    /// True when the cell stops rays: OCCUPIED, and UNKNOWN treated conservatively as occupied.
    pub fn is_occupied(&self, cell: GridCell) -> Result<bool, MapError> {
        self.state(cell).map(CellState::blocks_ray)
    }

    /// Ray-blocking test on signed cell indices; anything outside the grid blocks.
    #[inline]
    pub fn blocks(&self, ix: i64, iy: i64) -> bool {
        if ix < 0 || iy < 0 || ix >= self.frame.width as i64 || iy >= self.frame.height as i64 {
            return true;
        }
        self.cells[iy as usize * self.frame.width + ix as usize].blocks_ray()
    }

    pub fn is_free_at(&self, x: f64, y: f64) -> bool {
        self.world_to_grid(x, y)
            .map(|c| self.cells[self.frame.index(c)] == CellState::Free)
            .unwrap_or(false)
    }

    pub fn free_cells(&self) -> Vec<GridCell> {
        let w = self.width();
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == CellState::Free)
            .map(|(i, _)| GridCell::new(i % w, i / w))
            .collect()
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|s| **s == state).count()
    }

    /// Copy of this map with the origin shifted by `(dx, dy)` in the world frame.
    pub fn translated(&self, dx: f64, dy: f64) -> OccupancyGrid {
        let origin = self.origin().translated(dx, dy);
        OccupancyGrid {
            frame: GridFrame::new(self.width(), self.height(), self.resolution(), origin)
                .expect("dimensions already validated"),
            cells: self.cells.clone(),
        }
    }
}
