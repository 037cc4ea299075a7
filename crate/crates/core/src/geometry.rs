use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle - TAU * ((angle + PI) / TAU).floor();
    // floor() rounding can land exactly on +π for inputs just below an odd multiple of π.
    if wrapped >= PI {
        wrapped - TAU
    } else if wrapped < -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

/// SE(2) pose. The heading is kept in `[-π, π)` by every constructor and operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawPose", into = "RawPose")]
pub struct Pose2D {
    x: f64,
    y: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPose {
    x: f64,
    y: f64,
    theta: f64,
}

impl From<RawPose> for Pose2D {
    fn from(raw: RawPose) -> Self {
        Pose2D::new(raw.x, raw.y, raw.theta)
    }
}

impl From<Pose2D> for RawPose {
    fn from(p: Pose2D) -> Self {
        RawPose {
            x: p.x,
            y: p.y,
            theta: p.theta,
        }
    }
}

impl Default for Pose2D {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `self ⊕ local`: applies `local`, expressed in this pose's frame.
    pub fn compose(&self, local: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
            self.theta + local.theta,
        )
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Pose of `other` expressed in this pose's frame, so that `self.compose(&self.between(other)) == other`.
    pub fn between(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Pose2D::new(c * dx + s * dy, -s * dx + c * dy, other.theta - self.theta)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Pose2D {
        Pose2D {
            x: self.x + dx,
            y: self.y + dy,
            theta: self.theta,
        }
    }

    pub fn with_theta(&self, theta: f64) -> Pose2D {
        Pose2D::new(self.x, self.y, theta)
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}
