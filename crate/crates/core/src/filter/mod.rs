//! Monte Carlo localization over a weighted particle set.

mod estimate;
mod step;

pub use estimate::{estimate, EstimateMode, PoseEstimate};
pub use step::{FilterConfig, ParticleFilter, StepOutput, StepTiming};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::Pose2D;
use crate::map::OccupancyGrid;
use crate::motion::{MotionModel, OdometryDelta};
use crate::rng::{StreamSeed, INIT_STREAM, RESAMPLE_STREAM};
use crate::sensor::{PreparedScan, SensorModel};

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("particle count must be at least 1")]
    Empty,
    #[error("map has no free cells to initialize from")]
    NoFreeCells,
    #[error("initial pose ({x:.3}, {y:.3}) is outside the map")]
    OutOfBounds { x: f64, y: f64 },
    #[error("scan does not cover the configured scanlines")]
    ScanMismatch,
    #[error("invalid filter parameter: {0}")]
    Config(String),
}

/// Weighted hypotheses. `log_weights` are normalized so `Σ exp = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    poses: Vec<Pose2D>,
    log_weights: Vec<f64>,
    ess: f64,
    lost: bool,
}

impl ParticleSet {
    /// Equal-weight set over the given poses.
    pub fn uniform(poses: Vec<Pose2D>) -> Result<Self, FilterError> {
        if poses.is_empty() {
            return Err(FilterError::Empty);
        }
        let n = poses.len();
        Ok(Self {
            log_weights: vec![-(n as f64).ln(); n],
            ess: n as f64,
            poses,
            lost: false,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn poses(&self) -> &[Pose2D] {
        &self.poses
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Effective sample size `1 / Σ w²` from the last normalization.
    pub fn ess(&self) -> f64 {
        self.ess
    }

    /// Set when the last update could not score any particle.
    pub fn is_lost(&self) -> bool {
        self.lost
    }

    /// Adds `increments` to the log-weights and renormalizes.
    pub fn reweight(&mut self, increments: &[f64]) {
        assert_eq!(increments.len(), self.len());
        for (l, d) in self.log_weights.iter_mut().zip(increments) {
            *l += d;
        }
        self.normalize();
    }

    /// Log-sum-exp normalization; also refreshes the ESS.
    pub fn normalize(&mut self) {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            self.set_uniform();
            return;
        }
        let total: f64 = self.log_weights.iter().map(|l| (l - max).exp()).sum();
        let lse = max + total.ln();
        let mut sq = 0.0;
        for l in &mut self.log_weights {
            *l -= lse;
            let w = l.exp();
            sq += w * w;
        }
        self.ess = 1.0 / sq;
    }

    fn set_uniform(&mut self) {
        let n = self.len();
        self.log_weights.iter_mut().for_each(|l| *l = -(n as f64).ln());
        self.ess = n as f64;
    }
}

/// Uniform over FREE cells, uniform position within each cell, uniform heading.
pub fn init_global(grid: &OccupancyGrid, n: usize, seed: StreamSeed) -> Result<ParticleSet, FilterError> {
    if n == 0 {
        return Err(FilterError::Empty);
    }
    let free = grid.free_cells();
    if free.is_empty() {
        return Err(FilterError::NoFreeCells);
    }
    let res = grid.resolution();
    let origin = grid.origin();
    let poses = (0..n as u64)
        .map(|i| {
            let mut rng = seed.stream(INIT_STREAM, i);
            let cell = free[rng.random_range(0..free.len())];
            let lx = (cell.ix as f64 + rng.random::<f64>()) * res;
            let ly = (cell.iy as f64 + rng.random::<f64>()) * res;
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let p = origin.compose(&Pose2D::new(lx, ly, 0.0));
            Pose2D::new(p.x(), p.y(), theta)
        })
        .collect();
    ParticleSet::uniform(poses)
}

/// Gaussian cloud around `center` with per-axis standard deviations `[x, y, θ]`.
pub fn init_pose(
    grid: &OccupancyGrid,
    center: &Pose2D,
    sigmas: [f64; 3],
    n: usize,
    seed: StreamSeed,
) -> Result<ParticleSet, FilterError> {
    if n == 0 {
        return Err(FilterError::Empty);
    }
    if grid.world_to_grid(center.x(), center.y()).is_none() {
        return Err(FilterError::OutOfBounds {
            x: center.x(),
            y: center.y(),
        });
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(FilterError::Config(format!("init sigmas must be non-negative, got {sigmas:?}")));
    }
    let poses = (0..n as u64)
        .map(|i| {
            let mut rng = seed.stream(INIT_STREAM, i);
            let e: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            Pose2D::new(
                center.x() + sigmas[0] * e[0],
                center.y() + sigmas[1] * e[1],
                center.theta() + sigmas[2] * e[2],
            )
        })
        .collect();
    ParticleSet::uniform(poses)
}

/// Propagates every particle through `model`; particle `i` draws from stream `(epoch, i)`.
pub fn predict(ps: &mut ParticleSet, d: &OdometryDelta, model: &MotionModel, seed: StreamSeed, epoch: u64, parallel: bool) {
    let one = |(i, p): (usize, &mut Pose2D)| {
        let mut rng = seed.stream(epoch, i as u64);
        *p = model.sample(p, d, &mut rng);
    };
    if parallel {
        ps.poses.par_iter_mut().enumerate().for_each(one);
    } else {
        ps.poses.iter_mut().enumerate().for_each(one);
    }
}

/// Outcome of one measurement update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    pub ess: f64,
    pub out_of_bounds: usize,
    pub lost: bool,
}

/// Weighs every particle against the scan and renormalizes.
///
/// When no particle can be scored the weights are reset to uniform and the
/// set is flagged as lost.
pub fn update(ps: &mut ParticleSet, sensor: &SensorModel, scan: &PreparedScan, parallel: bool) -> UpdateReport {
    let mut inc = vec![0.0; ps.len()];
    let out_of_bounds = sensor.weigh_all(&ps.poses, scan, &mut inc, parallel);
    let lost = out_of_bounds == ps.len();
    if lost {
        ps.set_uniform();
    } else {
        ps.reweight(&inc);
    }
    ps.lost = lost;
    UpdateReport {
        ess: ps.ess,
        out_of_bounds,
        lost,
    }
}

/// Systematic (low-variance) resampling with a single uniform offset.
pub fn resample<R: Rng + ?Sized>(ps: &mut ParticleSet, rng: &mut R) {
    let n = ps.len();
    let u0: f64 = rng.random::<f64>() / n as f64;
    let weights = ps.weights();
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0usize;
    for j in 0..n {
        let u = u0 + j as f64 / n as f64;
        // `<=` keeps zero-weight particles from ever being selected.
        while cum <= u && i + 1 < n {
            i += 1;
            cum += weights[i];
        }
        // Guard against rounding leaving us on a zero-weight tail particle.
        while weights[i] == 0.0 && i > 0 {
            i -= 1;
        }
        out.push(ps.poses[i]);
    }
    ps.poses = out;
    ps.set_uniform();
}

/// Resamples only when ESS falls below `frac · N`. Returns whether it did.
pub fn maybe_resample(ps: &mut ParticleSet, frac: f64, seed: StreamSeed, epoch: u64) -> bool {
    if ps.ess >= frac * ps.len() as f64 {
        return false;
    }
    let mut rng = seed.stream(epoch, RESAMPLE_STREAM);
    resample(ps, &mut rng);
    true
}
