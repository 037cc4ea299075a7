use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{estimate, init_global, init_pose, maybe_resample, predict, update, EstimateMode, FilterError, ParticleSet, PoseEstimate, UpdateReport};
use crate::geometry::Pose2D;
use crate::map::OccupancyGrid;
use crate::motion::{MotionModel, OdometryDelta};
use crate::rng::StreamSeed;
use crate::sensor::{ScanFrame, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub n: usize,
    /// Resample when ESS drops below this fraction of N.
    pub resample_ess_frac: f64,
    pub estimate: EstimateMode,
    /// Weigh and propagate particles on the rayon pool.
    pub parallel: bool,
    /// Initial cloud standard deviations `[x, y, θ]` around a known start.
    pub init_sigmas: [f64; 3],
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n: 3000,
            resample_ess_frac: 0.5,
            estimate: EstimateMode::Mean,
            parallel: false,
            init_sigmas: [0.1, 0.1, 0.05],
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.n == 0 {
            return Err(FilterError::Empty);
        }
        if !(0.0..=1.0).contains(&self.resample_ess_frac) {
            return Err(FilterError::Config(format!(
                "resample_ess_frac must be in [0, 1], got {}",
                self.resample_ess_frac
            )));
        }
        Ok(())
    }
}

/// Wall time spent in each phase of one filter step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTiming {
    pub predict: Duration,
    pub update: Duration,
    pub resample: Duration,
    pub estimate: Duration,
}

impl StepTiming {
    pub fn total(&self) -> Duration {
        self.predict + self.update + self.resample + self.estimate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub estimate: PoseEstimate,
    pub timing: StepTiming,
    pub update: UpdateReport,
    pub resampled: bool,
}

/// One filter instance: particles plus the shared motion and sensor context.
#[derive(Debug, Clone)]
pub struct ParticleFilter {
    config: FilterConfig,
    particles: ParticleSet,
    motion: MotionModel,
    sensor: SensorModel,
    seed: StreamSeed,
    epoch: u64,
}

impl ParticleFilter {
    /// Starts from a Gaussian cloud around `start`.
    pub fn at_pose(
        config: FilterConfig,
        grid: &OccupancyGrid,
        start: &Pose2D,
        motion: MotionModel,
        sensor: SensorModel,
        seed: u64,
    ) -> Result<Self, FilterError> {
        config.validate()?;
        let seed = StreamSeed(seed);
        let particles = init_pose(grid, start, config.init_sigmas, config.n, seed)?;
        Ok(Self::from_particles(config, particles, motion, sensor, seed))
    }

    /// Starts from a uniform spread over the free space.
    pub fn global(config: FilterConfig, grid: &OccupancyGrid, motion: MotionModel, sensor: SensorModel, seed: u64) -> Result<Self, FilterError> {
        config.validate()?;
        let seed = StreamSeed(seed);
        let particles = init_global(grid, config.n, seed)?;
        Ok(Self::from_particles(config, particles, motion, sensor, seed))
    }

    pub fn from_particles(config: FilterConfig, particles: ParticleSet, motion: MotionModel, sensor: SensorModel, seed: StreamSeed) -> Self {
        Self {
            config,
            particles,
            motion,
            sensor,
            seed,
            epoch: 0,
        }
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn sensor(&self) -> &SensorModel {
        &self.sensor
    }

    pub fn motion(&self) -> &MotionModel {
        &self.motion
    }

    pub fn current_estimate(&self, stamp: f64) -> PoseEstimate {
        estimate(&self.particles, self.config.estimate, stamp)
    }

    /// predict, update, ESS-gated resample, estimate.
    pub fn step(&mut self, d: &OdometryDelta, scan: &ScanFrame) -> Result<StepOutput, FilterError> {
        let prepared = self.sensor.prepare(scan).ok_or(FilterError::ScanMismatch)?;
        let epoch = self.epoch;
        self.epoch += 1;

        let t0 = Instant::now();
        predict(&mut self.particles, d, &self.motion, self.seed, epoch, self.config.parallel);
        let t1 = Instant::now();
        let report = update(&mut self.particles, &self.sensor, &prepared, self.config.parallel);
        let t2 = Instant::now();
        let resampled = maybe_resample(&mut self.particles, self.config.resample_ess_frac, self.seed, epoch);
        let t3 = Instant::now();
        let est = estimate(&self.particles, self.config.estimate, scan.stamp);
        let t4 = Instant::now();

        Ok(StepOutput {
            estimate: est,
            timing: StepTiming {
                predict: t1 - t0,
                update: t2 - t1,
                resample: t3 - t2,
                estimate: t4 - t3,
            },
            update: report,
            resampled,
        })
    }
}
