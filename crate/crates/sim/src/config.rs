//! Run configuration: one nested document covering every tunable, with
//! unknown keys rejected at every level.

use std::path::PathBuf;

use racemcl_core::filter::FilterConfig;
use racemcl_core::motion::{MotionModelKind, MotionParams};
use racemcl_core::raycast::BackendKind;
use racemcl_core::sensor::{BeamModelParams, LayoutKind, DEFAULT_FLOOR_LOG_WEIGHT};
use serde::{Deserialize, Serialize};

use crate::controller::ControllerParams;
use crate::eval::AlignmentParams;
use crate::lidar::LidarParams;
use crate::slip::SlipProfile;
use crate::vehicle::VehicleParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every lap derives its own streams from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub track: TrackConfig,
    pub lut: LutConfig,
    pub lidar: LidarParams,
    pub vehicle: VehicleParams,
    pub controller: ControllerParams,
    pub motion: MotionParams,
    pub sensor: SensorConfig,
    pub filter: FilterConfig,
    pub slip: SlipConfig,
    pub sim: SimParams,
    pub eval: AlignmentParams,
    pub experiment: ExperimentParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out_dir: PathBuf::from("out"),
            track: TrackConfig::default(),
            lut: LutConfig::default(),
            lidar: LidarParams::default(),
            vehicle: VehicleParams::default(),
            controller: ControllerParams::default(),
            motion: MotionParams::default(),
            sensor: SensorConfig::default(),
            filter: FilterConfig::default(),
            slip: SlipConfig::default(),
            sim: SimParams::default(),
            eval: AlignmentParams::default(),
            experiment: ExperimentParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    /// Directory with map.yaml, map.pgm, raceline.csv, centerline.csv.
    pub dir: PathBuf,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("fixtures/tracks/oval"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LutConfig {
    pub backend: BackendKind,
    pub ntheta: usize,
    pub memory_cap_mb: u64,
    /// Prebuilt table to load instead of building one.
    pub path: Option<PathBuf>,
}

impl Default for LutConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Lut,
            ntheta: 108,
            memory_cap_mb: 1024,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub layout: LayoutKind,
    pub k: usize,
    pub aspect: f64,
    /// Log-likelihood per scanline given to poses outside the map.
    pub floor_log_weight: f64,
    pub beam: BeamModelParams,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            layout: LayoutKind::Boxed,
            k: 60,
            aspect: 0.3,
            floor_log_weight: DEFAULT_FLOOR_LOG_WEIGHT,
            beam: BeamModelParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlipConfig {
    pub hq: SlipProfile,
    pub lq: SlipProfile,
}

impl Default for SlipConfig {
    fn default() -> Self {
        Self {
            hq: SlipProfile::hq(),
            lq: SlipProfile::lq(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlipKind {
    Hq,
    Lq,
}

impl SlipKind {
    pub fn name(&self) -> &'static str {
        match self {
            SlipKind::Hq => "hq",
            SlipKind::Lq => "lq",
        }
    }
}

impl SlipConfig {
    pub fn get(&self, kind: SlipKind) -> SlipProfile {
        match kind {
            SlipKind::Hq => self.hq,
            SlipKind::Lq => self.lq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub physics_hz: f64,
    pub scan_hz: f64,
    /// Abort a lap after this many seconds.
    pub max_lap_time: f64,
    /// Minimum clearance (m) between either axle and an occupied cell.
    pub collision_margin: f64,
    /// Seconds excluded from position RMSE while the filter converges.
    pub settle_time: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            physics_hz: 400.0,
            scan_hz: 40.0,
            max_lap_time: 60.0,
            collision_margin: 0.1,
            settle_time: 1.0,
        }
    }
}

impl SimParams {
    pub fn substeps(&self) -> usize {
        (self.physics_hz / self.scan_hz).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub laps: usize,
    pub models: Vec<MotionModelKind>,
    pub slips: Vec<SlipKind>,
    /// Drive on ground truth (no filter in the loop) instead of the condition grid.
    pub ground_truth: bool,
    /// Also write each lap's SimLog as JSON lines.
    pub write_logs: bool,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            laps: 10,
            models: vec![MotionModelKind::DiffDrive, MotionModelKind::Tum],
            slips: vec![SlipKind::Hq, SlipKind::Lq],
            ground_truth: false,
            write_logs: false,
        }
    }
}

impl RunConfig {
    /// Checks cross-field constraints that serde cannot express.
    pub fn validate(&self) -> Result<(), String> {
        self.motion.validate().map_err(|e| format!("motion: {e}"))?;
        self.sensor.beam.validate().map_err(|e| format!("sensor.beam: {e}"))?;
        self.filter.validate().map_err(|e| format!("filter: {e}"))?;
        self.slip.hq.validate().map_err(|e| format!("slip.hq: {e}"))?;
        self.slip.lq.validate().map_err(|e| format!("slip.lq: {e}"))?;
        if self.sensor.k == 0 || self.sensor.k > self.lidar.beams {
            return Err(format!("sensor.k must be in 1..={}, got {}", self.lidar.beams, self.sensor.k));
        }
        if !(self.sensor.aspect > 0.0) {
            return Err(format!("sensor.aspect must be positive, got {}", self.sensor.aspect));
        }
        if !(self.sensor.floor_log_weight < 0.0) {
            return Err("sensor.floor_log_weight must be negative".into());
        }
        if self.lut.ntheta == 0 {
            return Err("lut.ntheta must be positive".into());
        }
        if self.lidar.beams == 0 || !(self.lidar.range_max > 0.0) || !(self.lidar.fov_deg > 0.0 && self.lidar.fov_deg <= 360.0) {
            return Err("lidar: beams, range_max, and fov_deg (0, 360] must be positive".into());
        }
        if !(self.lidar.noise >= 0.0) {
            return Err("lidar.noise must be non-negative".into());
        }
        let ratio = self.sim.physics_hz / self.sim.scan_hz;
        if !(self.sim.scan_hz > 0.0 && ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return Err("sim.physics_hz must be a positive integer multiple of sim.scan_hz".into());
        }
        if !(self.sim.max_lap_time > 0.0) {
            return Err("sim.max_lap_time must be positive".into());
        }
        if self.eval.tolerance.is_some_and(|t| !(t > 0.0)) {
            return Err("eval.tolerance must be positive".into());
        }
        if self.experiment.laps == 0 {
            return Err("experiment.laps must be at least 1".into());
        }
        if !(self.controller.speed_scale > 0.0) {
            return Err("controller.speed_scale must be positive".into());
        }
        if (self.vehicle.wheelbase - self.motion.wheelbase).abs() > 1e-12 || (self.vehicle.max_steer - self.motion.max_steer).abs() > 1e-12 {
            return Err("vehicle.wheelbase/max_steer must match motion.wheelbase/max_steer".into());
        }
        Ok(())
    }
}
