use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::cast_world;
use super::{RangeSource, RaycastError};
use crate::geometry::Pose2D;
use crate::map::{CellState, GridFrame, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LutParams {
    /// Angular bins over the full circle.
    pub ntheta: usize,
    /// Ranges are clamped to this value (meters).
    pub max_range: f64,
    /// Refuse to build tables larger than this many bytes.
    pub memory_cap_bytes: u64,
}

impl Default for LutParams {
    fn default() -> Self {
        Self {
            ntheta: 108,
            max_range: 10.0,
            memory_cap_bytes: 1 << 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LutBuildReport {
    pub build_time: Duration,
    pub bytes: u64,
    pub entries: u64,
    pub casts: u64,
}

/// Precomputed expected ranges over `(cell, angular bin)`.
///
/// Ranges are stored as `u16` multiples of `resolution / 4`. Bin `k` is
/// centered on world angle `theta0 + k·2π/ntheta`; non-free source cells hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeLut {
    pub(super) frame: GridFrame,
    pub(super) ntheta: usize,
    pub(super) max_range: f64,
    pub(super) theta0: f64,
    pub(super) quantum: f64,
    pub(super) values: Vec<u16>,
}

pub(super) fn quantum_for(resolution: f64) -> f64 {
    resolution / 4.0
}

pub fn build_lut(grid: &OccupancyGrid, params: &LutParams) -> Result<(RangeLut, LutBuildReport), RaycastError> {
    let started = Instant::now();
    if params.ntheta == 0 {
        return Err(RaycastError::InvalidParams("ntheta must be at least 1".into()));
    }
    if !(params.max_range.is_finite() && params.max_range > 0.0) {
        return Err(RaycastError::InvalidParams(format!("max_range must be positive, got {}", params.max_range)));
    }
    let frame = *grid.frame();
    let quantum = quantum_for(frame.resolution);
    if params.max_range / quantum > f64::from(u16::MAX) {
        return Err(RaycastError::InvalidParams(format!(
            "max_range {} m does not fit 16-bit ranges at {} m steps",
            params.max_range, quantum
        )));
    }
    let entries = frame.cell_count() as u64 * params.ntheta as u64;
    let bytes = entries * 2;
    if bytes > params.memory_cap_bytes {
        return Err(RaycastError::MemoryCap {
            needed: bytes,
            cap: params.memory_cap_bytes,
        });
    }

    let ntheta = params.ntheta;
    let bin_width = TAU / ntheta as f64;
    let theta0 = 0.0;
    let bins: Vec<f64> = (0..ntheta).map(|k| theta0 + k as f64 * bin_width).collect();
    let mut values = vec![0u16; entries as usize];
    let cells = grid.cells();
    values
        .par_chunks_mut(ntheta)
        .enumerate()
        .for_each(|(i, slot)| {
            if cells[i] != CellState::Free {
                return;
            }
            let cell = crate::map::GridCell::new(i % frame.width, i / frame.width);
            let (x, y) = frame.grid_to_world(cell);
            for (v, angle) in slot.iter_mut().zip(&bins) {
                let r = cast_world(grid, x, y, *angle, params.max_range).expect("free cell is inside the grid");
                *v = quantize(r, quantum);
            }
        });
    let casts = grid.count(CellState::Free) as u64 * ntheta as u64;
    let lut = RangeLut {
        frame,
        ntheta,
        max_range: params.max_range,
        theta0,
        quantum,
        values,
    };
    Ok((
        lut,
        LutBuildReport {
            build_time: started.elapsed(),
            bytes,
            entries,
            casts,
        },
    ))
}

#[inline]
pub(super) fn quantize(range: f64, quantum: f64) -> u16 {
    (range / quantum).round().clamp(0.0, f64::from(u16::MAX)) as u16
}

impl RangeLut {
    pub fn ntheta(&self) -> usize {
        self.ntheta
    }

    pub fn nx(&self) -> usize {
        self.frame.width
    }

    pub fn ny(&self) -> usize {
        self.frame.height
    }

    pub fn resolution(&self) -> f64 {
        self.frame.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.frame.origin
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.ntheta as f64
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        self.theta0 + bin as f64 * self.bin_width()
    }

    /// Nearest angular bin for a world angle.
    #[inline]
    pub fn bin_of(&self, angle: f64) -> usize {
        let k = ((angle - self.theta0) * (self.ntheta as f64 / TAU)).round() as i64;
        k.rem_euclid(self.ntheta as i64) as usize
    }

    /// Stored range (meters) for a cell and bin.
    pub fn entry(&self, ix: usize, iy: usize, bin: usize) -> f64 {
        f64::from(self.values[(iy * self.frame.width + ix) * self.ntheta + bin]) * self.quantum
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn bytes(&self) -> u64 {
        self.values.len() as u64 * 2
    }

    pub fn raw_values(&self) -> &[u16] {
        &self.values
    }

    /// Nearest-bin lookup; errors when the pose lies outside the table.
    pub fn query(&self, pose: &Pose2D, bearing: f64) -> Result<f64, RaycastError> {
        self.range_from(pose, bearing)
    }

    /// Slice of all bins for the cell containing `(x, y)`.
    #[inline]
    pub fn cell_ranges(&self, x: f64, y: f64) -> Option<&[u16]> {
        let cell = self.frame.world_to_grid(x, y)?;
        let base = (cell.iy * self.frame.width + cell.ix) * self.ntheta;
        Some(&self.values[base..base + self.ntheta])
    }
}

impl RangeSource for RangeLut {
    #[inline]
    fn expected_range(&self, x: f64, y: f64, angle: f64) -> Option<f64> {
        let ranges = self.cell_ranges(x, y)?;
        Some(f64::from(ranges[self.bin_of(angle)]) * self.quantum)
    }

    fn max_range(&self) -> f64 {
        self.max_range
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.frame.world_to_grid(x, y).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::GridCell;
    use crate::raycast::cast_exact;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, PI};

    const RES: f64 = 0.05;

    fn params(ntheta: usize, max_range: f64) -> LutParams {
        LutParams {
            ntheta,
            max_range,
            memory_cap_bytes: 1 << 28,
        }
    }

    #[test]
    fn axis_bins_store_border_distance() {
        let g = OccupancyGrid::filled(10, 10, RES, Pose2D::identity(), CellState::Free).unwrap();
        let (lut, report) = build_lut(&g, &params(4, 10.0)).unwrap();
        assert_eq!(report.entries, 400);
        for iy in 0..10 {
            for ix in 0..10 {
                // closed form: distance from cell center to each border
                let cx = (ix as f64 + 0.5) * RES;
                let cy = (iy as f64 + 0.5) * RES;
                let want = [0.5 - cx, 0.5 - cy, cx, cy];
                for (bin, w) in want.iter().enumerate() {
                    assert!((lut.entry(ix, iy, bin) - w).abs() < 1e-9, "{ix},{iy},{bin}");
                }
            }
        }
    }

    #[test]
    fn obstacle_shortens_entries() {
        let g = OccupancyGrid::from_fn(20, 20, RES, Pose2D::identity(), |c| {
            if c == GridCell::new(15, 5) {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .unwrap();
        let (lut, _) = build_lut(&g, &params(8, 10.0)).unwrap();
        // From (5,5) looking +x the obstacle at column 15 is hit before the border.
        let r = lut.entry(5, 5, 0);
        let border = (20.0 - 5.5) * RES;
        assert!(r < border);
        assert!((r - 9.5 * RES).abs() < 1e-9);
        assert_eq!(lut.entry(15, 5, 0), 0.0);
    }

    #[test]
    fn single_bin_collapses_all_bearings() {
        let g = OccupancyGrid::filled(10, 10, RES, Pose2D::identity(), CellState::Free).unwrap();
        let (lut, _) = build_lut(&g, &params(1, 10.0)).unwrap();
        let p = Pose2D::new(0.12, 0.27, 0.0);
        let a = lut.query(&p, 0.0).unwrap();
        for b in [-3.0, -1.0, 0.5, FRAC_PI_2, 3.1] {
            assert_eq!(lut.query(&p, b).unwrap(), a);
        }
    }

    #[test]
    fn construction_points_equal_quantized_exact_cast() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let g = OccupancyGrid::from_fn(60, 40, RES, Pose2D::new(-1.0, 0.5, 0.2), |_| {
            if rng.random_bool(0.05) {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .unwrap();
        let (lut, _) = build_lut(&g, &params(36, 4.0)).unwrap();
        let free = g.free_cells();
        for _ in 0..100 {
            let cell = free[rng.random_range(0..free.len())];
            let bin = rng.random_range(0..36);
            let (x, y) = g.grid_to_world(cell);
            let pose = Pose2D::new(x, y, lut.bin_center(bin));
            let exact = cast_exact(&g, &pose, 0.0, 4.0).unwrap();
            let stored = lut.query(&pose, 0.0).unwrap();
            assert_eq!(stored, f64::from(quantize(exact, lut.quantum())) * lut.quantum());
            assert!((stored - exact).abs() <= lut.quantum() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn same_bin_same_answer() {
        let g = OccupancyGrid::filled(30, 30, RES, Pose2D::identity(), CellState::Free).unwrap();
        let (lut, _) = build_lut(&g, &params(108, 10.0)).unwrap();
        let p = Pose2D::new(0.4, 0.9, 0.0);
        let w = lut.bin_width();
        let center = lut.bin_center(17);
        assert_eq!(
            lut.query(&p, center - 0.4 * w).unwrap(),
            lut.query(&p, center + 0.4 * w).unwrap()
        );
        assert_eq!(lut.bin_of(-PI), lut.bin_of(PI));
    }

    #[test]
    fn memory_cap_and_bad_params() {
        let g = OccupancyGrid::filled(100, 100, RES, Pose2D::identity(), CellState::Free).unwrap();
        let capped = LutParams {
            memory_cap_bytes: 1000,
            ..params(108, 10.0)
        };
        assert!(matches!(build_lut(&g, &capped), Err(RaycastError::MemoryCap { .. })));
        assert!(build_lut(&g, &params(0, 10.0)).is_err());
        assert!(build_lut(&g, &params(4, -1.0)).is_err());
        assert!(build_lut(&g, &params(4, 1e4)).is_err());
    }

    #[test]
    fn out_of_bounds_query_errors() {
        let g = OccupancyGrid::filled(10, 10, RES, Pose2D::identity(), CellState::Free).unwrap();
        let (lut, _) = build_lut(&g, &params(4, 1.0)).unwrap();
        assert!(lut.query(&Pose2D::new(-0.01, 0.1, 0.0), 0.0).is_err());
    }

    #[test]
    fn deterministic_build() {
        let g = OccupancyGrid::from_fn(30, 20, RES, Pose2D::identity(), |c| {
            if (c.ix * 7 + c.iy * 3) % 11 == 0 {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .unwrap();
        let (a, _) = build_lut(&g, &params(24, 3.0)).unwrap();
        let (b, _) = build_lut(&g, &params(24, 3.0)).unwrap();
        assert_eq!(a.raw_values(), b.raw_values());
    }
}
