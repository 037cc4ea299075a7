use racemcl_core::raycast::{cast_exact, RaycastError};
use racemcl_core::sensor::{ScanFrame, ScanMeta};
use racemcl_core::{OccupancyGrid, Pose2D};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarParams {
    pub beams: usize,
    /// Field of view (degrees), centered straight ahead.
    pub fov_deg: f64,
    pub range_max: f64,
    /// Gaussian range noise std (m).
    pub noise: f64,
    /// Mounting position ahead of the rear axle (m).
    pub offset_x: f64,
}

impl Default for LidarParams {
    fn default() -> Self {
        Self {
            beams: 1080,
            fov_deg: 270.0,
            range_max: 10.0,
            noise: 0.02,
            offset_x: 0.27,
        }
    }
}

impl LidarParams {
    /// Beams at `fov/beams` spacing starting from `-fov/2`.
    pub fn meta(&self) -> ScanMeta {
        let fov = self.fov_deg.to_radians();
        ScanMeta {
            angle_min: -fov / 2.0,
            angle_increment: fov / self.beams as f64,
            beam_count: self.beams,
            range_max: self.range_max,
        }
    }

    pub fn offset(&self) -> Pose2D {
        Pose2D::new(self.offset_x, 0.0, 0.0)
    }
}

/// Exact casts from the LiDAR pose plus Gaussian noise, clamped to
/// `[0, range_max]`. Beams with no return stay at `range_max` exactly.
pub fn synth_scan<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    car: &Pose2D,
    lidar_offset: &Pose2D,
    meta: &ScanMeta,
    noise_sigma: f64,
    stamp: f64,
    rng: &mut R,
) -> Result<ScanFrame, RaycastError> {
    let sensor = car.compose(lidar_offset);
    if grid.world_to_grid(sensor.x(), sensor.y()).is_none() {
        return Err(RaycastError::OutOfBounds {
            x: sensor.x(),
            y: sensor.y(),
        });
    }
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).map_err(|e| RaycastError::InvalidParams(e.to_string()))?;
    let mut ranges = Vec::with_capacity(meta.beam_count);
    for i in 0..meta.beam_count {
        let r = cast_exact(grid, &sensor, meta.bearing(i), meta.range_max)?;
        let noisy = if r >= meta.range_max {
            meta.range_max
        } else {
            (r + noise.sample(rng)).clamp(0.0, meta.range_max)
        };
        ranges.push(noisy as f32);
    }
    Ok(ScanFrame::new(stamp, meta, ranges).expect("beam count is positive"))
}
