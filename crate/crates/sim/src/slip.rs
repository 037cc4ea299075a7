//! Wheel-odometry degradation.
//!
//! Slip is emulated in odometry space: each true frame-to-frame motion is
//! decomposed, corrupted, and recomposed onto the reported odometry pose, so
//! errors accumulate the way they do on a real encoder.

use racemcl_core::motion::{apply_motion, decompose_odometry};
use racemcl_core::Pose2D;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlipProfile {
    /// Multiplier on the reported translation.
    pub trans_scale: f64,
    /// Relative translation noise std.
    pub trans_noise: f64,
    /// Rotation noise std per meter travelled (rad/m), on each of rot1 and rot2.
    pub rot_noise: f64,
}

impl Default for SlipProfile {
    fn default() -> Self {
        Self::hq()
    }
}

impl SlipProfile {
    pub fn identity() -> Self {
        Self {
            trans_scale: 1.0,
            trans_noise: 0.0,
            rot_noise: 0.0,
        }
    }

    /// Grippy tires: near-perfect odometry.
    pub fn hq() -> Self {
        Self {
            trans_scale: 1.0,
            trans_noise: 0.01,
            rot_noise: 0.005,
        }
    }

    /// Slippery tires: wheels over-report travel and heading drifts.
    pub fn lq() -> Self {
        Self {
            trans_scale: 1.3,
            trans_noise: 0.05,
            rot_noise: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.trans_scale > 0.0 && self.trans_scale.is_finite()) {
            return Err(format!("trans_scale must be positive, got {}", self.trans_scale));
        }
        if !(self.trans_noise >= 0.0 && self.rot_noise >= 0.0) {
            return Err("slip noise terms must be non-negative".into());
        }
        Ok(())
    }
}

/// Reported odometry pose after the true motion `true_prev → true_curr`.
pub fn corrupt_odometry<R: Rng + ?Sized>(
    odom_prev: &Pose2D,
    true_prev: &Pose2D,
    true_curr: &Pose2D,
    slip: &SlipProfile,
    rng: &mut R,
) -> Pose2D {
    let d = decompose_odometry(true_prev, true_curr, 0.0, 1.0).expect("dt is positive");
    let std = |s: f64| Normal::new(0.0, s).expect("std is finite and non-negative");
    let trans = d.trans * slip.trans_scale * (1.0 + std(slip.trans_noise).sample(rng));
    let rot_sigma = slip.rot_noise * d.trans;
    let rot1 = d.rot1 + std(rot_sigma).sample(rng);
    let rot2 = d.rot2 + std(rot_sigma).sample(rng);
    apply_motion(odom_prev, rot1, trans, rot2)
}

/// Pose obtained by replaying odometry increments from a known start.
pub fn dead_reckon(start: &Pose2D, odom_start: &Pose2D, odom_now: &Pose2D) -> Pose2D {
    start.compose(&odom_start.between(odom_now))
}
