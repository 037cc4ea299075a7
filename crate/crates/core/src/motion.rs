//! Odometry motion models for particle propagation.
//!
//! Odometry between two frames is decomposed into rotate–translate–rotate
//! `(rot1, trans, rot2)`. Three samplers are provided:
//!
//! * [`sample_naive`]: exact advance plus fixed-variance noise on `x`, `y`, `θ`.
//! * [`sample_diff_drive`]: each motion component perturbed with variance
//!   proportional to the rotation and translation magnitudes.
//! * [`sample_tum`]: diff-drive, except that once the translation reaches
//!   `lam_thresh` the standard deviation of each rotation perturbation is
//!   capped at `cap_gain · trans · tan(max_steer) / wheelbase`, the heading
//!   change an Ackermann car can actually produce over that distance.
//!
//! Poses are those of the rear axle.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Pose2D};

/// Below this translation the heading change is attributed entirely to `rot2`.
pub const DEGENERATE_TRANS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("dt must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("invalid motion parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Frame-to-frame odometry increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryDelta {
    pub rot1: f64,
    pub trans: f64,
    pub rot2: f64,
    /// Longitudinal speed at the measurement (m/s).
    pub v: f64,
    pub dt: f64,
}

impl OdometryDelta {
    pub fn zero(dt: f64) -> Self {
        Self {
            rot1: 0.0,
            trans: 0.0,
            rot2: 0.0,
            v: 0.0,
            dt,
        }
    }

    pub fn heading_change(&self) -> f64 {
        normalize_angle(self.rot1 + self.rot2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    /// How much rotation affects rotation variance.
    pub alpha1: f64,
    /// How much translation affects rotation variance.
    pub alpha2: f64,
    /// How much translation affects translation variance.
    pub alpha3: f64,
    /// How much rotation affects translation variance.
    pub alpha4: f64,
    /// Minimum translation (m) for the speed-dependent cap to apply.
    pub lam_thresh: f64,
    /// Naive model: position noise std (m).
    pub fixed_sigma_xy: f64,
    /// Naive model: heading noise std (rad).
    pub fixed_sigma_theta: f64,
    /// Steering limit (rad) bounding the heading change per meter.
    pub max_steer: f64,
    /// Axle distance (m).
    pub wheelbase: f64,
    /// Unitless gain on the Ackermann heading cap.
    pub cap_gain: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            alpha1: 0.5,
            alpha2: 0.015,
            alpha3: 0.1,
            alpha4: 1.0,
            lam_thresh: 0.1,
            fixed_sigma_xy: 0.05,
            fixed_sigma_theta: 0.05,
            max_steer: 0.4189,
            wheelbase: 0.33,
            cap_gain: 0.05,
        }
    }
}

impl MotionParams {
    pub fn zero_noise() -> Self {
        Self {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
            alpha4: 0.0,
            fixed_sigma_xy: 0.0,
            fixed_sigma_theta: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        let nonneg = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("alpha4", self.alpha4),
            ("fixed_sigma_xy", self.fixed_sigma_xy),
            ("fixed_sigma_theta", self.fixed_sigma_theta),
            ("cap_gain", self.cap_gain),
        ];
        for (name, value) in nonneg {
            if !(value.is_finite() && value >= 0.0) {
                return Err(MotionError::InvalidParam { name, value });
            }
        }
        if !(self.lam_thresh > 0.0) {
            return Err(MotionError::InvalidParam {
                name: "lam_thresh",
                value: self.lam_thresh,
            });
        }
        if !(self.wheelbase > 0.0) {
            return Err(MotionError::InvalidParam {
                name: "wheelbase",
                value: self.wheelbase,
            });
        }
        if !(self.max_steer > 0.0 && self.max_steer < std::f64::consts::FRAC_PI_2) {
            return Err(MotionError::InvalidParam {
                name: "max_steer",
                value: self.max_steer,
            });
        }
        Ok(())
    }

    /// Heading-noise cap (rad) for a given translation.
    pub fn rotation_cap(&self, trans: f64) -> f64 {
        self.cap_gain * trans * self.max_steer.tan() / self.wheelbase
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionModelKind {
    Naive,
    #[serde(rename = "diffdrive")]
    DiffDrive,
    #[default]
    Tum,
}

impl std::fmt::Display for MotionModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MotionModelKind::Naive => "naive",
            MotionModelKind::DiffDrive => "diffdrive",
            MotionModelKind::Tum => "tum",
        })
    }
}

impl std::str::FromStr for MotionModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Self::Naive),
            "diffdrive" => Ok(Self::DiffDrive),
            "tum" => Ok(Self::Tum),
            other => Err(format!("unknown motion model '{other}' (expected naive, diffdrive, tum)")),
        }
    }
}

/// A model kind bound to its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub kind: MotionModelKind,
    pub params: MotionParams,
}

impl MotionModel {
    pub fn new(kind: MotionModelKind, params: MotionParams) -> Result<Self, MotionError> {
        params.validate()?;
        Ok(Self { kind, params })
    }

    pub fn sample<R: Rng + ?Sized>(&self, pose: &Pose2D, d: &OdometryDelta, rng: &mut R) -> Pose2D {
        match self.kind {
            MotionModelKind::Naive => sample_naive(pose, d, &self.params, rng),
            MotionModelKind::DiffDrive => sample_diff_drive(pose, d, &self.params, rng),
            MotionModelKind::Tum => sample_tum(pose, d, &self.params, rng),
        }
    }
}

pub fn decompose_odometry(prev: &Pose2D, curr: &Pose2D, v: f64, dt: f64) -> Result<OdometryDelta, MotionError> {
    if !(dt > 0.0) {
        return Err(MotionError::NonPositiveDt(dt));
    }
    let dx = curr.x() - prev.x();
    let dy = curr.y() - prev.y();
    let trans = dx.hypot(dy);
    let dtheta = normalize_angle(curr.theta() - prev.theta());
    let (rot1, rot2) = if trans < DEGENERATE_TRANS {
        (0.0, dtheta)
    } else {
        let rot1 = normalize_angle(dy.atan2(dx) - prev.theta());
        (rot1, normalize_angle(dtheta - rot1))
    };
    Ok(OdometryDelta {
        rot1,
        trans,
        rot2,
        v,
        dt,
    })
}

/// Advances `pose` by rotate–translate–rotate.
pub fn apply_motion(pose: &Pose2D, rot1: f64, trans: f64, rot2: f64) -> Pose2D {
    let heading = pose.theta() + rot1;
    Pose2D::new(
        pose.x() + trans * heading.cos(),
        pose.y() + trans * heading.sin(),
        heading + rot2,
    )
}

/// Perturbed motion components drawn by a sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyMotion {
    pub rot1: f64,
    pub trans: f64,
    pub rot2: f64,
}

/// Standard deviations of `(rot1, trans, rot2)` under the diff-drive model.
pub fn diff_drive_sigmas(d: &OdometryDelta, p: &MotionParams) -> [f64; 3] {
    let (r1, t, r2) = (d.rot1, d.trans, d.rot2);
    [
        (p.alpha1 * r1 * r1 + p.alpha2 * t * t).sqrt(),
        (p.alpha3 * t * t + p.alpha4 * (r1 * r1 + r2 * r2)).sqrt(),
        (p.alpha1 * r2 * r2 + p.alpha2 * t * t).sqrt(),
    ]
}

/// Standard deviations under the high-speed model: diff-drive with the rotation terms capped.
pub fn tum_sigmas(d: &OdometryDelta, p: &MotionParams) -> [f64; 3] {
    let mut s = diff_drive_sigmas(d, p);
    if d.trans >= p.lam_thresh {
        let cap = p.rotation_cap(d.trans);
        s[0] = s[0].min(cap);
        s[2] = s[2].min(cap);
    }
    s
}

fn perturb<R: Rng + ?Sized>(d: &OdometryDelta, sigmas: [f64; 3], rng: &mut R) -> NoisyMotion {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let z3: f64 = rng.sample(StandardNormal);
    NoisyMotion {
        rot1: d.rot1 - sigmas[0] * z1,
        trans: d.trans - sigmas[1] * z2,
        rot2: d.rot2 - sigmas[2] * z3,
    }
}

pub fn perturb_diff_drive<R: Rng + ?Sized>(d: &OdometryDelta, p: &MotionParams, rng: &mut R) -> NoisyMotion {
    perturb(d, diff_drive_sigmas(d, p), rng)
}

pub fn perturb_tum<R: Rng + ?Sized>(d: &OdometryDelta, p: &MotionParams, rng: &mut R) -> NoisyMotion {
    perturb(d, tum_sigmas(d, p), rng)
}

pub fn sample_diff_drive<R: Rng + ?Sized>(pose: &Pose2D, d: &OdometryDelta, p: &MotionParams, rng: &mut R) -> Pose2D {
    let m = perturb_diff_drive(d, p, rng);
    apply_motion(pose, m.rot1, m.trans, m.rot2)
}

pub fn sample_tum<R: Rng + ?Sized>(pose: &Pose2D, d: &OdometryDelta, p: &MotionParams, rng: &mut R) -> Pose2D {
    let m = perturb_tum(d, p, rng);
    apply_motion(pose, m.rot1, m.trans, m.rot2)
}

pub fn sample_naive<R: Rng + ?Sized>(pose: &Pose2D, d: &OdometryDelta, p: &MotionParams, rng: &mut R) -> Pose2D {
    let moved = apply_motion(pose, d.rot1, d.trans, d.rot2);
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    let nt: f64 = rng.sample(StandardNormal);
    Pose2D::new(
        moved.x() + p.fixed_sigma_xy * nx,
        moved.y() + p.fixed_sigma_xy * ny,
        moved.theta() + p.fixed_sigma_theta * nt,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn delta(rot1: f64, trans: f64, rot2: f64) -> OdometryDelta {
        OdometryDelta {
            rot1,
            trans,
            rot2,
            v: trans / 0.025,
            dt: 0.025,
        }
    }

    fn std_of(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
    }

    #[test]
    fn decompose_examples() {
        let o = Pose2D::identity();
        let d = decompose_odometry(&o, &Pose2D::new(1.0, 0.0, 0.0), 1.0, 0.1).unwrap();
        assert_eq!((d.rot1, d.trans, d.rot2), (0.0, 1.0, 0.0));

        let d = decompose_odometry(&o, &Pose2D::new(0.0, 0.0, FRAC_PI_2), 0.0, 0.1).unwrap();
        assert_eq!((d.rot1, d.trans), (0.0, 0.0));
        assert!((d.rot2 - FRAC_PI_2).abs() < 1e-15);

        let d = decompose_odometry(&o, &Pose2D::new(1.0, 1.0, FRAC_PI_2), 1.0, 0.1).unwrap();
        assert!((d.rot1 - FRAC_PI_4).abs() < 1e-12);
        assert!((d.trans - SQRT_2).abs() < 1e-12);
        assert!((d.rot2 - FRAC_PI_4).abs() < 1e-12);

        assert_eq!(
            decompose_odometry(&o, &o, 0.0, 0.0),
            Err(MotionError::NonPositiveDt(0.0))
        );
    }

    #[test]
    fn reverse_motion_uses_half_turns() {
        let d = decompose_odometry(&Pose2D::identity(), &Pose2D::new(-0.5, 0.0, 0.0), -1.0, 0.5).unwrap();
        assert!(d.trans > 0.0);
        assert!((d.rot1.abs() - std::f64::consts::PI).abs() < 1e-12);
        let back = apply_motion(&Pose2D::identity(), d.rot1, d.trans, d.rot2);
        assert!((back.x() + 0.5).abs() < 1e-12 && back.theta().abs() < 1e-12);
    }

    #[test]
    fn zero_noise_is_deterministic_inverse_of_decompose() {
        let p = MotionParams::zero_noise();
        let d = delta(FRAC_PI_4, SQRT_2, FRAC_PI_4);
        let mut rng = seeded(1);
        for sampler in [sample_diff_drive::<rand_chacha::ChaCha8Rng>, sample_tum, sample_naive] {
            let out = sampler(&Pose2D::identity(), &d, &p, &mut rng);
            assert!((out.x() - 1.0).abs() < 1e-12);
            assert!((out.y() - 1.0).abs() < 1e-12);
            assert!((out.theta() - FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_translation_heading_variance() {
        // Two independent rotation draws, each with variance alpha2 * trans^2.
        let p = MotionParams {
            alpha1: 0.0,
            alpha2: 0.015,
            ..MotionParams::default()
        };
        let d = delta(0.0, 1.0, 0.0);
        let mut rng = seeded(7);
        let heading: Vec<f64> = (0..100_000)
            .map(|_| sample_diff_drive(&Pose2D::identity(), &d, &p, &mut rng).theta())
            .collect();
        let want = (2.0 * 0.015f64).sqrt();
        assert!((std_of(&heading) / want - 1.0).abs() < 0.03);
    }

    #[test]
    fn tum_matches_diff_drive_below_threshold() {
        let p = MotionParams::default();
        let d = delta(0.02, 0.05, -0.01);
        let a = sample_tum(&Pose2D::identity(), &d, &p, &mut seeded(3));
        let b = sample_diff_drive(&Pose2D::identity(), &d, &p, &mut seeded(3));
        assert_eq!(a, b);
    }

    #[test]
    fn tum_narrower_at_racing_speed() {
        // 7.6 m/s at 40 Hz.
        let p = MotionParams::default();
        let d = delta(0.0, 0.19, 0.0);
        let heading = |f: fn(&Pose2D, &OdometryDelta, &MotionParams, &mut rand_chacha::ChaCha8Rng) -> Pose2D| {
            let mut rng = seeded(11);
            (0..20_000)
                .map(|_| f(&Pose2D::identity(), &d, &p, &mut rng).theta())
                .collect::<Vec<_>>()
        };
        assert!(std_of(&heading(sample_tum)) < std_of(&heading(sample_diff_drive)));
    }

    #[test]
    fn disabled_cap_matches_diff_drive() {
        let p = MotionParams {
            max_steer: FRAC_PI_2 - 1e-9,
            cap_gain: 1.0,
            ..MotionParams::default()
        };
        p.validate().unwrap();
        for d in [delta(0.1, 0.5, -0.2), delta(0.0, 0.2, 0.0), delta(1.0, 2.0, 0.5)] {
            let a = sample_tum(&Pose2D::new(1.0, 2.0, 0.3), &d, &p, &mut seeded(5));
            let b = sample_diff_drive(&Pose2D::new(1.0, 2.0, 0.3), &d, &p, &mut seeded(5));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gate_continuity_when_cap_is_loose() {
        let p = MotionParams {
            cap_gain: 100.0,
            ..MotionParams::default()
        };
        let eps = 1e-9;
        for trans in [p.lam_thresh - eps, p.lam_thresh + eps] {
            let d = delta(0.05, trans, 0.02);
            assert_eq!(tum_sigmas(&d, &p), diff_drive_sigmas(&d, &p));
        }
    }

    #[test]
    fn naive_noise_matches_sigma_and_ignores_motion_size() {
        let p = MotionParams {
            fixed_sigma_xy: 0.1,
            ..MotionParams::default()
        };
        let mut rng = seeded(21);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_naive(&Pose2D::identity(), &delta(0.0, 0.0, 0.0), &p, &mut rng).x())
            .collect();
        assert!((std_of(&xs) / 0.1 - 1.0).abs() < 0.03);

        let spread = |trans: f64| {
            let mut rng = seeded(4);
            let xs: Vec<f64> = (0..5000)
                .map(|_| sample_naive(&Pose2D::identity(), &delta(0.0, trans, 0.0), &p, &mut rng).x() - trans)
                .collect();
            std_of(&xs)
        };
        assert!((spread(0.01) - spread(1.0)).abs() < 1e-9);
    }

    #[test]
    fn params_validation() {
        assert!(MotionParams::default().validate().is_ok());
        let bad = [
            MotionParams { alpha1: -0.1, ..Default::default() },
            MotionParams { lam_thresh: 0.0, ..Default::default() },
            MotionParams { wheelbase: 0.0, ..Default::default() },
            MotionParams { max_steer: FRAC_PI_2, ..Default::default() },
            MotionParams { max_steer: 0.0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
        assert_eq!("diffdrive".parse::<MotionModelKind>(), Ok(MotionModelKind::DiffDrive));
        assert!("ackermann".parse::<MotionModelKind>().is_err());
    }

    proptest! {
        #[test]
        fn decompose_then_apply_recovers_pose(
            x0 in -5.0f64..5.0, y0 in -5.0f64..5.0, t0 in -3.1f64..3.1,
            x1 in -5.0f64..5.0, y1 in -5.0f64..5.0, t1 in -3.1f64..3.1,
        ) {
            let a = Pose2D::new(x0, y0, t0);
            let b = Pose2D::new(x1, y1, t1);
            let d = decompose_odometry(&a, &b, 1.0, 0.1).unwrap();
            prop_assert!(d.trans >= 0.0);
            let c = apply_motion(&a, d.rot1, d.trans, d.rot2);
            prop_assert!((c.x() - b.x()).abs() < 1e-9);
            prop_assert!((c.y() - b.y()).abs() < 1e-9);
            prop_assert!(normalize_angle(c.theta() - b.theta()).abs() < 1e-9);
        }

        #[test]
        fn tum_never_wider_than_diff_drive(r1 in -1.0f64..1.0, t in 0.0f64..2.0, r2 in -1.0f64..1.0) {
            let p = MotionParams::default();
            let d = delta(r1, t, r2);
            let (a, b) = (tum_sigmas(&d, &p), diff_drive_sigmas(&d, &p));
            prop_assert!(a[0] <= b[0] && a[2] <= b[2] && a[1] == b[1]);
        }
    }
}
