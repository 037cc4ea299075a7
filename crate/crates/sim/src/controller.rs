use racemcl_core::Pose2D;
use serde::{Deserialize, Serialize};

use crate::track::Raceline;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// Lookahead = `lookahead_min + lookahead_gain · v` (m).
    pub lookahead_min: f64,
    pub lookahead_gain: f64,
    /// Proportional speed gain (1/s).
    pub speed_gain: f64,
    /// Multiplier on the raceline speed profile.
    pub speed_scale: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            lookahead_min: 0.6,
            lookahead_gain: 0.12,
            speed_gain: 4.0,
            speed_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub accel: f64,
    pub steer: f64,
    pub target_speed: f64,
}

/// Pure pursuit on the raceline plus a proportional speed loop.
pub fn pure_pursuit(pose: &Pose2D, v: f64, line: &Raceline, p: &ControllerParams, wheelbase: f64) -> Command {
    let proj = line.project(pose.x(), pose.y());
    let lookahead = p.lookahead_min + p.lookahead_gain * v;
    let (gx, gy) = line.point_at(proj.s + lookahead);
    let local = pose.inverse().compose(&Pose2D::new(gx, gy, 0.0));
    let ld2 = local.x() * local.x() + local.y() * local.y();
    let steer = if ld2 > 1e-12 {
        (2.0 * wheelbase * local.y() / ld2).atan()
    } else {
        0.0
    };
    // Look ahead for the speed target too, so braking starts before corners.
    let target_speed = p.speed_scale * line.speed_at(proj.s + lookahead);
    Command {
        accel: p.speed_gain * (target_speed - v),
        steer,
        target_speed,
    }
}
