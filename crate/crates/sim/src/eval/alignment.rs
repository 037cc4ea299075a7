use racemcl_core::map::DistanceField;
use racemcl_core::sensor::ScanFrame;
use racemcl_core::Pose2D;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentParams {
    /// Endpoint-to-wall distance counted as aligned (m). `None` means twice the map resolution.
    pub tolerance: Option<f64>,
    /// Score every `stride`-th beam.
    pub stride: usize,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        Self {
            tolerance: None,
            stride: 1,
        }
    }
}

impl AlignmentParams {
    pub fn tolerance_for(&self, resolution: f64) -> f64 {
        self.tolerance.unwrap_or(2.0 * resolution)
    }
}

/// Percentage of finite-range beam endpoints, projected from the estimated
/// pose, that lie within tolerance of an occupied cell. `None` when every
/// scored beam is a max-range return.
pub fn scan_alignment(
    est_pose: &Pose2D,
    scan: &ScanFrame,
    field: &DistanceField,
    params: &AlignmentParams,
    lidar_offset: &Pose2D,
) -> Option<f64> {
    let tol = params.tolerance_for(field.resolution());
    let sensor = est_pose.compose(lidar_offset);
    let (mut total, mut aligned) = (0usize, 0usize);
    for i in (0..scan.ranges.len()).step_by(params.stride.max(1)) {
        if scan.is_max_range(i) {
            continue;
        }
        let r = f64::from(scan.ranges[i]);
        let a = sensor.theta() + scan.bearing(i);
        let (x, y) = (sensor.x() + r * a.cos(), sensor.y() + r * a.sin());
        total += 1;
        if field.distance_at(x, y).is_some_and(|d| d <= tol) {
            aligned += 1;
        }
    }
    (total > 0).then(|| 100.0 * aligned as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use racemcl_core::raycast::cast_exact;
    use racemcl_core::sensor::ScanMeta;
    use racemcl_core::{CellState, OccupancyGrid};

    fn scan_from(grid: &OccupancyGrid, pose: &Pose2D, meta: &ScanMeta) -> ScanFrame {
        let r = (0..meta.beam_count)
            .map(|i| cast_exact(grid, pose, meta.bearing(i), meta.range_max).unwrap() as f32)
            .collect();
        ScanFrame::new(0.0, meta, r).unwrap()
    }

    fn corridor() -> OccupancyGrid {
        // Long straight corridor 1.5 m wide, 30 m long, walls 2 cells thick.
        OccupancyGrid::from_fn(600, 34, 0.05, Pose2D::identity(), |c| {
            if c.iy < 2 || c.iy >= 32 {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .unwrap()
    }

    #[test]
    fn truth_aligns_fully() {
        let g = corridor();
        let f = DistanceField::new(&g);
        let meta = ScanMeta::centered(541, 270f64.to_radians(), 10.0);
        let pose = Pose2D::new(15.0, 0.85, 0.05);
        let scan = scan_from(&g, &pose, &meta);
        let s = scan_alignment(&pose, &scan, &f, &AlignmentParams::default(), &Pose2D::identity()).unwrap();
        assert_eq!(s, 100.0);
    }

    #[test]
    fn lateral_shift_misaligns_side_walls() {
        let g = corridor();
        let f = DistanceField::new(&g);
        let meta = ScanMeta::centered(541, 270f64.to_radians(), 10.0);
        let pose = Pose2D::new(15.0, 0.85, 0.0);
        let scan = scan_from(&g, &pose, &meta);
        let p = AlignmentParams::default();
        let tol = p.tolerance_for(0.05);
        let shifted = pose.translated(0.0, 2.0 * tol + 0.01);
        let s = scan_alignment(&shifted, &scan, &f, &p, &Pose2D::identity()).unwrap();
        // The corridor ends lie beyond max range, so every finite beam is a
        // side-wall beam: near-wall endpoints land in free space more than tol
        // from the wall, far-wall endpoints are pushed past the wall and out of
        // the map. The score therefore drops by the full side-beam fraction.
        assert_eq!(s, 0.0);
    }

    #[test]
    fn flipped_pose_in_asymmetric_room() {
        let g = OccupancyGrid::from_fn(100, 60, 0.05, Pose2D::identity(), |c| {
            let wall = c.ix == 0 || c.iy == 0 || c.ix == 99 || c.iy == 59;
            let notch = (70..75).contains(&c.ix) && c.iy < 35 || (15..40).contains(&c.ix) && (40..43).contains(&c.iy);
            if wall || notch {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .unwrap();
        let f = DistanceField::new(&g);
        let meta = ScanMeta::centered(720, std::f64::consts::TAU, 10.0);
        let pose = Pose2D::new(1.5, 1.2, 0.3);
        let scan = scan_from(&g, &pose, &meta);
        let flipped = pose.with_theta(pose.theta() + std::f64::consts::PI);
        let s = scan_alignment(&flipped, &scan, &f, &AlignmentParams::default(), &Pose2D::identity()).unwrap();
        assert!(s < 50.0, "{s}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn rigid_transform_invariance(
            px in 3.0f64..27.0,
            py in 0.3f64..1.3,
            th in -3.1f64..3.1,
            (ex, ey, et) in (-0.2f64..0.2, -0.2f64..0.2, -0.1f64..0.1),
            (dx, dy) in (-50.0f64..50.0, -50.0f64..50.0),
        ) {
            let g = corridor();
            let meta = ScanMeta::centered(541, 270f64.to_radians(), 10.0);
            let scan = scan_from(&g, &Pose2D::new(px, py, th), &meta);
            let est = Pose2D::new(px + ex, py + ey, th + et);
            let p = AlignmentParams::default();
            let a = scan_alignment(&est, &scan, &DistanceField::new(&g), &p, &Pose2D::identity());
            let moved = g.translated(dx, dy);
            let b = scan_alignment(&est.translated(dx, dy), &scan, &DistanceField::new(&moved), &p, &Pose2D::identity());
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b),
                (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
            }
        }
    }

    #[test]
    fn all_max_range_is_missing() {
        let g = corridor();
        let meta = ScanMeta::centered(10, 1.0, 10.0);
        let scan = ScanFrame::new(0.0, &meta, vec![10.0; 10]).unwrap();
        assert!(scan_alignment(&Pose2D::new(1.0, 0.8, 0.0), &scan, &DistanceField::new(&g), &AlignmentParams::default(), &Pose2D::identity()).is_none());
    }
}
