//! Closed-loop lap driver and open-loop log replay.

use racemcl_core::filter::{ParticleFilter, StepTiming};
use racemcl_core::map::DistanceField;
use racemcl_core::motion::decompose_odometry;
use racemcl_core::rng::{derive_seed, seeded};
use racemcl_core::{normalize_angle, Pose2D};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::controller::pure_pursuit;
use crate::eval::{lateral_error, scan_alignment, LapResult, StepRecord};
use crate::lidar::synth_scan;
use crate::log::{SimLog, SimRecord};
use crate::slip::{corrupt_odometry, dead_reckon, SlipProfile};
use crate::track::Track;
use crate::vehicle::{step_car, CarState};

/// Where the controller gets its pose from.
pub enum PoseSource {
    GroundTruth,
    Filter(Box<ParticleFilter>),
    /// Fault injection: the estimate never leaves the start pose.
    FrozenEstimate,
}

/// Static inputs shared by every lap on one track.
pub struct LapContext<'a> {
    pub track: &'a Track,
    pub field: &'a DistanceField,
    pub config: &'a RunConfig,
}

pub struct LapOutput {
    pub log: SimLog,
    pub result: LapResult,
}

/// Sub-seeds of one lap. Paired conditions share `lap_seed`, so they see the
/// same LiDAR noise and slip draws.
pub fn lap_seeds(lap_seed: u64) -> (u64, u64, u64) {
    (derive_seed(lap_seed, 1), derive_seed(lap_seed, 2), derive_seed(lap_seed, 3))
}

/// Drives one flying lap from the first raceline point.
///
/// Physics runs at `sim.physics_hz`; scans, odometry, the filter and the
/// controller run at `sim.scan_hz` with commands held in between. The speed
/// loop always uses the true speed so only steering depends on localization.
pub fn drive_lap(ctx: &LapContext, slip: &SlipProfile, mut source: PoseSource, lap: usize, lap_seed: u64) -> LapOutput {
    let cfg = ctx.config;
    let line = &ctx.track.raceline;
    let (slip_seed, lidar_seed, _) = lap_seeds(lap_seed);
    let mut slip_rng = seeded(slip_seed);
    let mut lidar_rng = seeded(lidar_seed);

    let substeps = cfg.sim.substeps();
    let dt_scan = 1.0 / cfg.sim.scan_hz;
    let dt = dt_scan / substeps as f64;
    let meta = cfg.lidar.meta();
    let offset = cfg.lidar.offset();
    let wb = cfg.vehicle.wheelbase;

    let start = line.start_pose();
    let mut car = CarState::new(start, cfg.controller.speed_scale * line.speed_at(0.0));
    let mut odom = start;
    let mut estimate = start;
    let mut t = 0.0;
    let mut log = SimLog::default();
    let mut steps = Vec::new();

    let mut s_prev = line.project(start.x(), start.y()).s;
    let length = line.length();
    let mut progress = 0.0;
    let mut lap_time = None;
    let mut dnf_reason = None;

    match synth_scan(&ctx.track.map, &car.pose, &offset, &meta, cfg.lidar.noise, 0.0, &mut lidar_rng) {
        Ok(scan) => log.push(SimRecord {
            stamp: 0.0,
            ground_truth: car.pose,
            odom_pose: odom,
            v: car.v,
            scan,
        }),
        Err(e) => dnf_reason = Some(format!("start pose unusable: {e}")),
    }

    let mut tick = 0u64;
    'outer: while dnf_reason.is_none() {
        let control_pose = match source {
            PoseSource::GroundTruth => car.pose,
            PoseSource::Filter(_) | PoseSource::FrozenEstimate => estimate,
        };
        let cmd = pure_pursuit(&control_pose, car.v, line, &cfg.controller, wb);
        let tick_start = car.pose;
        for _ in 0..substeps {
            car = step_car(&car, cmd.accel, cmd.steer, dt, &cfg.vehicle);
            t += dt;
            if let Some(reason) = collision(ctx, &car.pose) {
                dnf_reason = Some(reason);
                break 'outer;
            }
            let s = line.project(car.pose.x(), car.pose.y()).s;
            let mut ds = s - s_prev;
            if ds > length / 2.0 {
                ds -= length;
            } else if ds < -length / 2.0 {
                ds += length;
            }
            progress += ds;
            s_prev = s;
            if progress >= length {
                lap_time = Some(t);
                break 'outer;
            }
        }
        if t > cfg.sim.max_lap_time {
            dnf_reason = Some(format!("timeout after {:.1} s", cfg.sim.max_lap_time));
            break;
        }
        tick += 1;
        let stamp = tick as f64 * dt_scan;

        let odom_prev = odom;
        odom = corrupt_odometry(&odom_prev, &tick_start, &car.pose, slip, &mut slip_rng);
        let v_odom = odom_prev.distance(&odom) / dt_scan;
        let scan = match synth_scan(&ctx.track.map, &car.pose, &offset, &meta, cfg.lidar.noise, stamp, &mut lidar_rng) {
            Ok(s) => s,
            Err(e) => {
                dnf_reason = Some(format!("lidar left the map: {e}"));
                break;
            }
        };

        let mut rec = StepRecord {
            stamp,
            lateral_error: lateral_error(&car.pose, line),
            alignment: None,
            position_error: None,
            heading_error: None,
            speed: car.v,
            predict_ms: None,
            update_ms: None,
            resample_ms: None,
            estimate_ms: None,
            step_ms: None,
        };
        let mut timing: Option<StepTiming> = None;
        if let PoseSource::Filter(filter) = &mut source {
            let d = decompose_odometry(&odom_prev, &odom, v_odom, dt_scan).expect("scan interval is positive");
            match filter.step(&d, &scan) {
                Ok(out) => {
                    estimate = out.estimate.pose;
                    timing = Some(out.timing);
                }
                Err(e) => {
                    dnf_reason = Some(format!("filter failed: {e}"));
                    break;
                }
            }
        }
        let scored = match source {
            PoseSource::GroundTruth => car.pose,
            _ => estimate,
        };
        rec.alignment = scan_alignment(&scored, &scan, ctx.field, &cfg.eval, &offset);
        if !matches!(source, PoseSource::GroundTruth) {
            rec.position_error = Some(estimate.distance(&car.pose));
            rec.heading_error = Some(normalize_angle(estimate.theta() - car.pose.theta()).abs());
        }
        if let Some(tm) = &timing {
            rec.set_timing(tm);
        }
        steps.push(rec);
        log.push(SimRecord {
            stamp,
            ground_truth: car.pose,
            odom_pose: odom,
            v: v_odom,
            scan,
        });
    }

    let dead_reckoning_error = dead_reckon(&start, &start, &odom).distance(&car.pose);
    LapOutput {
        log,
        result: LapResult {
            lap,
            lap_time,
            dnf: lap_time.is_none(),
            dnf_reason,
            dead_reckoning_error,
            steps,
        },
    }
}

/// Reports wall contact when either axle comes within the collision margin
/// of an occupied cell or leaves the map.
fn collision(ctx: &LapContext, pose: &Pose2D) -> Option<String> {
    let margin = ctx.config.sim.collision_margin;
    let front = pose.compose(&Pose2D::new(ctx.config.vehicle.wheelbase, 0.0, 0.0));
    for (name, p) in [("rear axle", pose), ("front axle", &front)] {
        match ctx.field.distance_at(p.x(), p.y()) {
            None => return Some(format!("{name} left the map at ({:.2}, {:.2})", p.x(), p.y())),
            Some(d) if d < margin => return Some(format!("wall contact ({name}) at ({:.2}, {:.2})", p.x(), p.y())),
            _ => {}
        }
    }
    None
}

/// One filter step of an open-loop replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub stamp: f64,
    pub estimate: Pose2D,
    pub ground_truth: Pose2D,
    pub position_error: f64,
    pub alignment: Option<f64>,
    pub update_ms: f64,
    pub step_ms: f64,
}

/// Runs `filter` on logged odometry and scans. The first record only
/// anchors odometry; every later record is one filter step.
pub fn replay_log(
    log: &SimLog,
    filter: &mut ParticleFilter,
    field: &DistanceField,
    cfg: &RunConfig,
) -> Result<Vec<ReplayStep>, racemcl_core::filter::FilterError> {
    let offset = cfg.lidar.offset();
    let mut out = Vec::with_capacity(log.len().saturating_sub(1));
    for w in log.records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.stamp - a.stamp;
        let d = decompose_odometry(&a.odom_pose, &b.odom_pose, b.v, dt)
            .map_err(|e| racemcl_core::filter::FilterError::Config(e.to_string()))?;
        let step = filter.step(&d, &b.scan)?;
        let est = step.estimate.pose;
        out.push(ReplayStep {
            stamp: b.stamp,
            estimate: est,
            ground_truth: b.ground_truth,
            position_error: est.distance(&b.ground_truth),
            alignment: scan_alignment(&est, &b.scan, field, &cfg.eval, &offset),
            update_ms: step.timing.update.as_secs_f64() * 1e3,
            step_ms: step.timing.total().as_secs_f64() * 1e3,
        });
    }
    Ok(out)
}
