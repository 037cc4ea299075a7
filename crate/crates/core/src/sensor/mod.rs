//! LiDAR scans, scanline selection, and the beam likelihood model.

mod beam;
mod layout;
mod model;

pub use beam::{BeamModelError, BeamModelParams, BeamModelTable};
pub use layout::{layout_boxed, layout_uniform, LayoutError, LayoutKind, ScanlineLayout};
pub use model::{weigh_particle, PreparedScan, SensorModel, DEFAULT_FLOOR_LOG_WEIGHT};

use serde::{Deserialize, Serialize};

/// Angular metadata shared by every scan of one sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanMeta {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub beam_count: usize,
    pub range_max: f64,
}

impl ScanMeta {
    /// Beams evenly covering `fov` radians centered on straight ahead.
    pub fn centered(beam_count: usize, fov: f64, range_max: f64) -> Self {
        let full = (fov - std::f64::consts::TAU).abs() < 1e-9;
        let angle_increment = if full || beam_count < 2 {
            fov / beam_count as f64
        } else {
            fov / (beam_count - 1) as f64
        };
        Self {
            angle_min: -fov / 2.0,
            angle_increment,
            beam_count,
            range_max,
        }
    }

    pub fn bearing(&self, index: usize) -> f64 {
        self.angle_min + index as f64 * self.angle_increment
    }

    pub fn angle_max(&self) -> f64 {
        self.bearing(self.beam_count.saturating_sub(1))
    }

    /// True when the beams wrap around the full circle.
    pub fn is_full_circle(&self) -> bool {
        self.beam_count as f64 * self.angle_increment >= std::f64::consts::TAU - 1e-9
    }
}

/// One LiDAR sweep. Non-returns are stored as `range_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFrame {
    pub stamp: f64,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub ranges: Vec<f32>,
}

impl ScanFrame {
    /// Builds a scan, mapping non-finite, negative, or over-range readings to `range_max`.
    pub fn new(stamp: f64, meta: &ScanMeta, mut ranges: Vec<f32>) -> Option<Self> {
        if ranges.is_empty() {
            return None;
        }
        let max = meta.range_max as f32;
        for r in &mut ranges {
            if !r.is_finite() || *r < 0.0 || *r > max {
                *r = max;
            }
        }
        Some(Self {
            stamp,
            angle_min: meta.angle_min,
            angle_increment: meta.angle_increment,
            range_max: meta.range_max,
            ranges,
        })
    }

    pub fn meta(&self) -> ScanMeta {
        ScanMeta {
            angle_min: self.angle_min,
            angle_increment: self.angle_increment,
            beam_count: self.ranges.len(),
            range_max: self.range_max,
        }
    }

    pub fn bearing(&self, index: usize) -> f64 {
        self.angle_min + index as f64 * self.angle_increment
    }

    pub fn is_max_range(&self, index: usize) -> bool {
        f64::from(self.ranges[index]) >= self.range_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_sanitizes_non_returns() {
        let meta = ScanMeta::centered(4, 1.0, 10.0);
        let s = ScanFrame::new(0.0, &meta, vec![1.0, f32::NAN, 12.0, f32::INFINITY]).unwrap();
        assert_eq!(s.ranges, vec![1.0, 10.0, 10.0, 10.0]);
        assert!(ScanFrame::new(0.0, &meta, vec![]).is_none());
    }

    #[test]
    fn centered_meta() {
        let m = ScanMeta::centered(1081, 270f64.to_radians(), 10.0);
        assert!((m.angle_max() - 135f64.to_radians()).abs() < 1e-12);
        assert!((m.angle_increment - 0.25f64.to_radians()).abs() < 1e-12);
        assert!(!m.is_full_circle());
        assert!(ScanMeta::centered(360, std::f64::consts::TAU, 10.0).is_full_circle());
    }
}
