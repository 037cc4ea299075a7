use serde::{Deserialize, Serialize};

use super::ParticleSet;
use crate::geometry::{normalize_angle, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    #[default]
    Mean,
    MaxWeight,
}

/// Point estimate with the particle cloud's weighted covariance over `(x, y, θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub pose: Pose2D,
    pub covariance: [[f64; 3]; 3],
    pub stamp: f64,
}

impl PoseEstimate {
    pub fn trace(&self) -> f64 {
        self.covariance[0][0] + self.covariance[1][1] + self.covariance[2][2]
    }

    pub fn position_trace(&self) -> f64 {
        self.covariance[0][0] + self.covariance[1][1]
    }
}

/// Weighted mean (circular for heading) or max-weight particle, plus the
/// weighted covariance about the weighted mean with wrapped heading residuals.
pub fn estimate(ps: &ParticleSet, mode: EstimateMode, stamp: f64) -> PoseEstimate {
    let w = ps.weights();
    let (mut mx, mut my, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    for (p, wi) in ps.poses().iter().zip(&w) {
        mx += wi * p.x();
        my += wi * p.y();
        s += wi * p.theta().sin();
        c += wi * p.theta().cos();
    }
    let mean = Pose2D::new(mx, my, s.atan2(c));

    let mut cov = [[0.0; 3]; 3];
    for (p, wi) in ps.poses().iter().zip(&w) {
        let r = [p.x() - mx, p.y() - my, normalize_angle(p.theta() - mean.theta())];
        for a in 0..3 {
            for b in a..3 {
                cov[a][b] += wi * r[a] * r[b];
            }
        }
    }
    for a in 0..3 {
        for b in 0..a {
            cov[a][b] = cov[b][a];
        }
    }

    let pose = match mode {
        EstimateMode::Mean => mean,
        EstimateMode::MaxWeight => {
            let best = ps
                .log_weights()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            ps.poses()[best]
        }
    };
    PoseEstimate {
        pose,
        covariance: cov,
        stamp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::init_pose;
    use crate::map::{CellState, OccupancyGrid};
    use crate::rng::StreamSeed;
    use std::f64::consts::PI;

    #[test]
    fn identical_particles() {
        let p = Pose2D::new(1.0, -2.0, 0.4);
        let ps = ParticleSet::uniform(vec![p; 10]).unwrap();
        let e = estimate(&ps, EstimateMode::Mean, 0.0);
        assert!(e.pose.distance(&p) < 1e-12 && (e.pose.theta() - 0.4).abs() < 1e-12);
        assert!(e.covariance.iter().flatten().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn heading_mean_wraps() {
        let ps = ParticleSet::uniform(vec![
            Pose2D::new(0.0, 0.0, 170f64.to_radians()),
            Pose2D::new(0.0, 0.0, -170f64.to_radians()),
        ])
        .unwrap();
        let e = estimate(&ps, EstimateMode::Mean, 0.0);
        assert!((e.pose.theta().abs() - PI).abs() < 1e-9);
        assert!((e.covariance[2][2] - 10f64.to_radians().powi(2)).abs() < 1e-9);
    }

    #[test]
    fn gaussian_cloud_covariance() {
        let g = OccupancyGrid::filled(200, 200, 0.05, Pose2D::identity(), CellState::Free).unwrap();
        let ps = init_pose(&g, &Pose2D::new(5.0, 5.0, 1.0), [0.1, 0.1, 0.1], 50_000, StreamSeed(8)).unwrap();
        let e = estimate(&ps, EstimateMode::Mean, 0.0);
        for i in 0..3 {
            assert!((e.covariance[i][i] - 0.01).abs() < 0.0005, "{i}: {}", e.covariance[i][i]);
        }
        assert!(e.covariance[0][1].abs() < 0.0005);
    }

    #[test]
    fn max_weight_mode() {
        let mut ps = ParticleSet::uniform(vec![Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(3.0, 0.0, 0.0)]).unwrap();
        ps.reweight(&[0.0, 2.0]);
        let e = estimate(&ps, EstimateMode::MaxWeight, 1.5);
        assert_eq!(e.pose.x(), 3.0);
        assert_eq!(e.stamp, 1.5);
    }

    #[test]
    fn covariance_is_psd() {
        let g = OccupancyGrid::filled(100, 100, 0.05, Pose2D::identity(), CellState::Free).unwrap();
        let mut ps = init_pose(&g, &Pose2D::new(2.0, 2.0, 3.0), [0.3, 0.05, 0.8], 300, StreamSeed(2)).unwrap();
        let inc: Vec<f64> = (0..300).map(|i| -((i % 17) as f64)).collect();
        ps.reweight(&inc);
        let c = estimate(&ps, EstimateMode::Mean, 0.0).covariance;
        // Sylvester: all leading principal minors of a PSD matrix are >= 0.
        let m1 = c[0][0];
        let m2 = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let m3 = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
            + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]);
        assert!(m1 >= -1e-12 && m2 >= -1e-12 && m3 >= -1e-12);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(c[a][b], c[b][a]);
            }
        }
    }
}
