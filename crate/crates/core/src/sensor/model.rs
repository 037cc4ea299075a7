use rayon::prelude::*;

use super::{BeamModelTable, ScanFrame, ScanlineLayout};
use crate::geometry::Pose2D;
use crate::raycast::{RangeBackend, RangeLut, RangeSource};

/// Per-scanline log-likelihood assigned to poses that cannot be scored.
/// Far below the smallest table entry, so such poses never win.
pub const DEFAULT_FLOOR_LOG_WEIGHT: f64 = -80.0;

/// Measured range bins for the selected scanlines of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedScan {
    bins: Vec<usize>,
}

impl PreparedScan {
    pub fn new(scan: &ScanFrame, layout: &ScanlineLayout, table: &BeamModelTable) -> Option<Self> {
        let bins = layout
            .indices()
            .iter()
            .map(|&i| scan.ranges.get(i).map(|&r| table.bin(f64::from(r))))
            .collect::<Option<Vec<_>>>()?;
        Some(Self { bins })
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }
}

fn score_generic<S: RangeSource + ?Sized>(
    source: &S,
    sensor: &Pose2D,
    bearings: &[f64],
    measured: &[usize],
    table: &BeamModelTable,
) -> Option<f64> {
    if !source.contains(sensor.x(), sensor.y()) {
        return None;
    }
    let mut sum = 0.0;
    for (&b, &m) in bearings.iter().zip(measured) {
        let expected = source.expected_range(sensor.x(), sensor.y(), sensor.theta() + b)?;
        sum += table.log_prob_bins(m, table.bin(expected));
    }
    Some(sum * table.squash())
}

#[inline]
fn score_lut(lut: &RangeLut, sensor: &Pose2D, bearings: &[f64], measured: &[usize], table: &BeamModelTable) -> Option<f64> {
    let ranges = lut.cell_ranges(sensor.x(), sensor.y())?;
    let q = lut.quantum();
    let mut sum = 0.0;
    for (&b, &m) in bearings.iter().zip(measured) {
        let r = f64::from(ranges[lut.bin_of(sensor.theta() + b)]) * q;
        sum += table.log_prob_bins(m, table.bin(r));
    }
    Some(sum * table.squash())
}

/// Scores one pose against a full scan with any range source.
///
/// Returns `floor` (already scaled for the scanline count) when the sensor
/// pose is outside the map or the scan is shorter than the layout.
pub fn weigh_particle<S: RangeSource + ?Sized>(
    pose: &Pose2D,
    scan: &ScanFrame,
    layout: &ScanlineLayout,
    source: &S,
    table: &BeamModelTable,
    lidar_offset: &Pose2D,
    floor: f64,
) -> f64 {
    let Some(prepared) = PreparedScan::new(scan, layout, table) else {
        return floor;
    };
    let sensor = pose.compose(lidar_offset);
    score_generic(source, &sensor, layout.bearings(), prepared.bins(), table).unwrap_or(floor)
}

/// Beam model bound to a layout, a range backend, and the LiDAR mounting offset.
#[derive(Debug, Clone)]
pub struct SensorModel {
    layout: ScanlineLayout,
    table: BeamModelTable,
    backend: RangeBackend,
    lidar_offset: Pose2D,
    floor_per_beam: f64,
}

impl SensorModel {
    pub fn new(layout: ScanlineLayout, table: BeamModelTable, backend: RangeBackend, lidar_offset: Pose2D) -> Self {
        Self {
            layout,
            table,
            backend,
            lidar_offset,
            floor_per_beam: DEFAULT_FLOOR_LOG_WEIGHT,
        }
    }

    pub fn with_floor(mut self, per_beam: f64) -> Self {
        self.floor_per_beam = per_beam;
        self
    }

    pub fn layout(&self) -> &ScanlineLayout {
        &self.layout
    }

    pub fn table(&self) -> &BeamModelTable {
        &self.table
    }

    pub fn backend(&self) -> &RangeBackend {
        &self.backend
    }

    pub fn lidar_offset(&self) -> &Pose2D {
        &self.lidar_offset
    }

    /// Log-weight given to unscorable poses.
    pub fn floor(&self) -> f64 {
        self.floor_per_beam * self.layout.len() as f64 * self.table.squash()
    }

    pub fn prepare(&self, scan: &ScanFrame) -> Option<PreparedScan> {
        PreparedScan::new(scan, &self.layout, &self.table)
    }

    /// Log-weight of `pose`, or `None` when the sensor sits outside the map.
    #[inline]
    pub fn try_weigh(&self, pose: &Pose2D, scan: &PreparedScan) -> Option<f64> {
        let sensor = pose.compose(&self.lidar_offset);
        let bearings = self.layout.bearings();
        match &self.backend {
            RangeBackend::Lut(lut) => score_lut(lut, &sensor, bearings, scan.bins(), &self.table),
            RangeBackend::Exact(ex) => score_generic(ex, &sensor, bearings, scan.bins(), &self.table),
        }
    }

    pub fn weigh(&self, pose: &Pose2D, scan: &PreparedScan) -> f64 {
        self.try_weigh(pose, scan).unwrap_or_else(|| self.floor())
    }

    /// Scores every pose into `out`; returns how many were out of bounds.
    pub fn weigh_all(&self, poses: &[Pose2D], scan: &PreparedScan, out: &mut [f64], parallel: bool) -> usize {
        assert_eq!(poses.len(), out.len());
        let floor = self.floor();
        let one = |(p, o): (&Pose2D, &mut f64)| match self.try_weigh(p, scan) {
            Some(w) => {
                *o = w;
                0usize
            }
            None => {
                *o = floor;
                1
            }
        };
        if parallel {
            poses.par_iter().zip(out.par_iter_mut()).map(one).sum()
        } else {
            poses.iter().zip(out.iter_mut()).map(one).sum()
        }
    }
}
