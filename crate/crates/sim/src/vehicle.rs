use racemcl_core::Pose2D;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub max_steer: f64,
    /// Steering slew limit (rad/s).
    pub max_steer_rate: f64,
    pub max_accel: f64,
    pub max_decel: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 0.33,
            max_steer: 0.4189,
            max_steer_rate: 3.2,
            max_accel: 6.0,
            max_decel: 9.0,
        }
    }
}

/// Rear-axle pose, speed, and current steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarState {
    pub pose: Pose2D,
    pub v: f64,
    pub steer: f64,
}

impl CarState {
    pub fn new(pose: Pose2D, v: f64) -> Self {
        Self { pose, v, steer: 0.0 }
    }
}

/// Kinematic bicycle step. Steering slews toward the command at the rate
/// limit; acceleration is clamped; the pose follows the exact arc for the
/// step's mean speed and final steering angle.
pub fn step_car(s: &CarState, accel: f64, steer_cmd: f64, dt: f64, p: &VehicleParams) -> CarState {
    let target = steer_cmd.clamp(-p.max_steer, p.max_steer);
    let max_delta = p.max_steer_rate * dt;
    let steer = s.steer + (target - s.steer).clamp(-max_delta, max_delta);
    let accel = accel.clamp(-p.max_decel, p.max_accel);
    let v = (s.v + accel * dt).max(0.0);
    let ds = 0.5 * (s.v + v) * dt;
    let curvature = steer.tan() / p.wheelbase;
    let dtheta = ds * curvature;
    let (x, y, th) = (s.pose.x(), s.pose.y(), s.pose.theta());
    let (nx, ny) = if dtheta.abs() < 1e-9 {
        (x + ds * th.cos(), y + ds * th.sin())
    } else {
        let r = 1.0 / curvature;
        (x + r * ((th + dtheta).sin() - th.sin()), y - r * ((th + dtheta).cos() - th.cos()))
    };
    CarState {
        pose: Pose2D::new(nx, ny, th + dtheta),
        v,
        steer,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::collection::vec;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    #[test]
    fn straight_and_stationary() {
        let p = VehicleParams::default();
        let s = CarState::new(Pose2D::new(1.0, 2.0, 0.5), 3.0);
        let n = step_car(&s, 0.0, 0.0, 0.01, &p);
        assert!((n.pose.x() - (1.0 + 0.03 * 0.5f64.cos())).abs() < 1e-12);
        assert!((n.pose.y() - (2.0 + 0.03 * 0.5f64.sin())).abs() < 1e-12);
        let still = CarState::new(Pose2D::new(1.0, 2.0, 0.5), 0.0);
        let m = step_car(&still, 0.0, 0.2, 0.01, &p);
        assert_eq!(m.pose, still.pose);
        assert!(m.steer > 0.0);
    }

    #[test]
    fn constant_steer_traces_circle() {
        let p = VehicleParams::default();
        let delta: f64 = 0.3;
        let radius = p.wheelbase / delta.tan();
        let v = 2.0;
        let dt = 1e-3;
        let mut s = CarState {
            pose: Pose2D::identity(),
            v,
            steer: delta,
        };
        let steps = (TAU * radius / (v * dt)).round() as usize;
        let (cx, cy) = (0.0, radius);
        let mut worst: f64 = 0.0;
        for _ in 0..steps {
            s = step_car(&s, 0.0, delta, dt, &p);
            let r = ((s.pose.x() - cx).powi(2) + (s.pose.y() - cy).powi(2)).sqrt();
            worst = worst.max((r - radius).abs());
        }
        assert!(worst < 1e-3, "{worst}");
        assert!(s.pose.distance(&Pose2D::identity()) < v * dt);
    }

    #[test]
    fn limits() {
        let p = VehicleParams::default();
        let s = CarState::new(Pose2D::identity(), 1.0);
        let n = step_car(&s, -100.0, 5.0, 1.0, &p);
        assert_eq!(n.v, 0.0);
        assert!(n.steer <= p.max_steer);
        let n = step_car(&s, 0.0, 5.0, 0.01, &p);
        assert!((n.steer - p.max_steer_rate * 0.01).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn zero_accel_keeps_speed(v in 0.0f64..8.0, dt in 1e-4f64..0.01, cmds in vec(-1.0f64..1.0, 1..300)) {
            let p = VehicleParams::default();
            let mut s = CarState::new(Pose2D::identity(), v);
            for c in cmds {
                s = step_car(&s, 0.0, c, dt, &p);
                prop_assert_eq!(s.v, v);
            }
        }

        #[test]
        fn state_stays_within_limits(v in 0.0f64..8.0, dt in 1e-4f64..0.01, cmds in vec((-30.0f64..30.0, -2.0f64..2.0), 1..300)) {
            let p = VehicleParams::default();
            let mut s = CarState::new(Pose2D::identity(), v);
            for (a, c) in cmds {
                s = step_car(&s, a, c, dt, &p);
                prop_assert!(s.v >= 0.0);
                prop_assert!(s.steer.abs() <= p.max_steer);
            }
        }
    }
}
